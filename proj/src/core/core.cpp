#include <string>

#include "cdpo/core/error.hpp"
#include "cdpo/core/rng.hpp"
#include "cdpo/core/types.hpp"

namespace cdpo {

const char* to_string(Family f) {
    switch (f) {
        case Family::CNF: return "cnf";
        case Family::CGAN: return "cgan";
        case Family::CVAE: return "cvae";
        case Family::CDM: return "cdm";
        case Family::Tabular: return "tabular";
    }
    return "unknown";
}

Family family_from_string(const std::string& s) {
    if (s == "cnf") return Family::CNF;
    if (s == "cgan") return Family::CGAN;
    if (s == "cvae") return Family::CVAE;
    if (s == "cdm") return Family::CDM;
    if (s == "tabular") return Family::Tabular;
    throw InvalidArgument("unknown model family '" + s + "'");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag1, std::uint64_t tag2) {
    // splitmix64 finalizer over the combined words
    auto mix = [](std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ tag1) ^ tag2);
}

}  // namespace cdpo
