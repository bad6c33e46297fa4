#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cdpo/core/rng.hpp"
#include "cdpo/core/types.hpp"

namespace cdpo::data {

/// One observed triple (x, a, y).
struct ObservationalSample {
    Vector x;
    int a = 0;
    Vector y;
};

/// Draws `count` outcomes from the ground-truth law of Y[a] given X = x,
/// one row per draw.
using CdpoSampler = std::function<Matrix(const Vector& x, int a, int count, Rng& rng)>;

/// Observational dataset with optional ground truth for evaluation.
/// Immutable after construction by convention; safe to share between readers.
struct PODataset {
    Matrix x;                  // n x d_x
    IntVector a;               // n, values in {0, 1}
    Matrix y;                  // n x d_y
    std::optional<Matrix> y0;  // joint potential outcomes, n x d_y each
    std::optional<Matrix> y1;
    CdpoSampler ground_truth;  // empty when no sampler is known

    int size() const { return static_cast<int>(x.rows()); }
    int dx() const { return static_cast<int>(x.cols()); }
    int dy() const { return static_cast<int>(y.cols()); }
    bool has_joint_po() const { return y0.has_value() && y1.has_value(); }
    bool has_ground_truth() const { return static_cast<bool>(ground_truth); }
    int count_arm(int arm) const;

    ObservationalSample sample(int i) const;
    /// Joint potential-outcome column block for arm `arm`; throws when absent.
    const Matrix& potential_outcomes(int arm) const;
    /// Rows `rows` as a new dataset (ground truth carried over).
    PODataset subset(std::span<const int> rows) const;

    /// Throws InvalidArgument on inconsistent shapes, non-binary treatments
    /// or non-finite values.
    void validate() const;
};

/// Conditioning view V of the covariates: target models see x restricted to
/// `mask`, nuisance models always read the full dataset.
class ConditioningView {
public:
    ConditioningView(const PODataset& ds, std::vector<int> mask);

    const PODataset& dataset() const { return *ds_; }
    const std::vector<int>& mask() const { return mask_; }
    int dim() const { return static_cast<int>(mask_.size()); }
    bool is_identity() const;

    Vector v(int row) const;
    Matrix v_rows(std::span<const int> rows) const;
    /// Projection of an arbitrary covariate vector.
    Vector project(const Vector& x) const;

private:
    const PODataset* ds_;
    std::vector<int> mask_;
};

/// Builds a view; an empty mask selects all covariates.
ConditioningView apply_v_mask(const PODataset& ds, std::vector<int> mask);

std::vector<int> all_indices(int n);

}  // namespace cdpo::data
