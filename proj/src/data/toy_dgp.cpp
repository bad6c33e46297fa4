#include "cdpo/data/toy_dgp.hpp"

#include <cmath>
#include <string>

#include "cdpo/core/error.hpp"

namespace cdpo::data {

EnumeratedToy enumerate_toy_dgp(const DiscreteToyDGP& dgp) {
    require(dgp.nx >= 1 && dgp.ny >= 1, "toy supports must be nonempty");
    require(dgp.joint.size() == static_cast<std::size_t>(dgp.nx * 2 * dgp.ny), "joint table has wrong size");
    double total = 0.0;
    for (double p : dgp.joint) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("joint table has a negative or non-finite entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw InvalidArgument("joint table is not normalized (sum = " + std::to_string(total) + ")");

    EnumeratedToy out;
    ToyTables& t = out.tables;
    t.nx = dgp.nx;
    t.ny = dgp.ny;
    t.px.assign(static_cast<std::size_t>(dgp.nx), 0.0);
    t.pxa.assign(static_cast<std::size_t>(dgp.nx * 2), 0.0);
    t.pi.assign(static_cast<std::size_t>(dgp.nx * 2), 0.0);
    t.xi.assign(dgp.joint.size(), 0.0);
    for (int x = 0; x < dgp.nx; ++x) {
        for (int a = 0; a < 2; ++a) {
            double s = 0.0;
            for (int y = 0; y < dgp.ny; ++y) {
                const double p = dgp.p(x, a, y);
                out.triples.push_back({x, a, y, p});
                s += p;
            }
            t.pxa[static_cast<std::size_t>(x * 2 + a)] = s;
            t.px[static_cast<std::size_t>(x)] += s;
        }
    }
    for (int x = 0; x < dgp.nx; ++x) {
        const double px = t.px[static_cast<std::size_t>(x)];
        for (int a = 0; a < 2; ++a) {
            const double pxa = t.pxa[static_cast<std::size_t>(x * 2 + a)];
            if (!(pxa > 0.0))
                throw InvalidArgument("P(X=" + std::to_string(x) + ", A=" + std::to_string(a) +
                                      ") is zero; overlap violated");
            t.pi[static_cast<std::size_t>(x * 2 + a)] = pxa / px;
            for (int y = 0; y < dgp.ny; ++y)
                t.xi[static_cast<std::size_t>((x * 2 + a) * dgp.ny + y)] = dgp.p(x, a, y) / pxa;
        }
    }
    return out;
}

DiscreteToyDGP make_structural_toy(int nx, int ny, std::vector<double> px, std::vector<double> pi1,
                                   std::vector<double> po_joint) {
    require(px.size() == static_cast<std::size_t>(nx), "p(x) has wrong size");
    require(pi1.size() == static_cast<std::size_t>(nx), "pi_1(x) has wrong size");
    require(po_joint.size() == static_cast<std::size_t>(nx * ny * ny), "potential-outcome table has wrong size");
    DiscreteToyDGP dgp;
    dgp.nx = nx;
    dgp.ny = ny;
    dgp.joint.assign(static_cast<std::size_t>(nx * 2 * ny), 0.0);
    for (int x = 0; x < nx; ++x) {
        const double p1 = pi1[static_cast<std::size_t>(x)];
        require(p1 > 0.0 && p1 < 1.0, "pi_1(x) must lie strictly inside (0, 1)");
        for (int y0 = 0; y0 < ny; ++y0) {
            for (int y1 = 0; y1 < ny; ++y1) {
                const double q = px[static_cast<std::size_t>(x)] *
                                 po_joint[static_cast<std::size_t>((x * ny + y0) * ny + y1)];
                dgp.joint[static_cast<std::size_t>((x * 2 + 0) * ny + y0)] += q * (1.0 - p1);
                dgp.joint[static_cast<std::size_t>((x * 2 + 1) * ny + y1)] += q * p1;
            }
        }
    }
    dgp.structural = DiscreteToyDGP::Structural{std::move(px), std::move(pi1), std::move(po_joint)};
    return dgp;
}

namespace {

std::vector<double> random_simplex(int n, Rng& rng, double floor) {
    std::vector<double> w(static_cast<std::size_t>(n));
    double s = 0.0;
    for (double& v : w) {
        v = floor + rng.uniform();
        s += v;
    }
    for (double& v : w) v /= s;
    return w;
}

}  // namespace

DiscreteToyDGP random_toy_dgp(int nx, int ny, Rng& rng, double overlap) {
    require(overlap > 0.0 && overlap < 0.5, "overlap must lie in (0, 0.5)");
    std::vector<double> px = random_simplex(nx, rng, 0.5);
    std::vector<double> pi1(static_cast<std::size_t>(nx));
    for (double& p : pi1) p = overlap + (1.0 - 2.0 * overlap) * rng.uniform();
    std::vector<double> po;
    po.reserve(static_cast<std::size_t>(nx * ny * ny));
    for (int x = 0; x < nx; ++x) {
        const std::vector<double> cell = random_simplex(ny * ny, rng, 0.2);
        po.insert(po.end(), cell.begin(), cell.end());
    }
    DiscreteToyDGP dgp = make_structural_toy(nx, ny, std::move(px), std::move(pi1), std::move(po));
    double total = 0.0;
    for (double p : dgp.joint) total += p;
    for (double& p : dgp.joint) p /= total;
    return dgp;
}

PODataset sample_toy_dataset(const DiscreteToyDGP& dgp, int n, Rng& rng) {
    require(n > 0, "sample size must be positive");
    std::vector<double> cdf(dgp.joint.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        acc += dgp.joint[i];
        cdf[i] = acc;
    }
    PODataset ds;
    ds.x.resize(n, 1);
    ds.a.resize(n);
    ds.y.resize(n, 1);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        std::size_t k = 0;
        while (k + 1 < cdf.size() && cdf[k] <= u) ++k;
        const int y = static_cast<int>(k) % dgp.ny;
        const int xa = static_cast<int>(k) / dgp.ny;
        ds.x(i, 0) = xa / 2;
        ds.a(i) = xa % 2;
        ds.y(i, 0) = y;
    }
    return ds;
}

}  // namespace cdpo::data
