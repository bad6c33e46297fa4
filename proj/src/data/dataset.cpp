#include "cdpo/data/dataset.hpp"

#include <numeric>
#include <string>

#include "cdpo/core/error.hpp"

namespace cdpo::data {

int PODataset::count_arm(int arm) const {
    return static_cast<int>((a.array() == arm).count());
}

ObservationalSample PODataset::sample(int i) const {
    require(i >= 0 && i < size(), "sample index out of range");
    return {x.row(i).transpose(), a(i), y.row(i).transpose()};
}

const Matrix& PODataset::potential_outcomes(int arm) const {
    if (!has_joint_po()) throw InvalidArgument("dataset carries no joint potential-outcome columns");
    require(arm == 0 || arm == 1, "treatment arm must be 0 or 1");
    return arm == 0 ? *y0 : *y1;
}

PODataset PODataset::subset(std::span<const int> rows) const {
    PODataset out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.x.resize(n, dx());
    out.a.resize(n);
    out.y.resize(n, dy());
    if (has_joint_po()) {
        out.y0 = Matrix(n, dy());
        out.y1 = Matrix(n, dy());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const int r = rows[static_cast<std::size_t>(i)];
        require(r >= 0 && r < size(), "subset row out of range");
        out.x.row(i) = x.row(r);
        out.a(i) = a(r);
        out.y.row(i) = y.row(r);
        if (has_joint_po()) {
            out.y0->row(i) = y0->row(r);
            out.y1->row(i) = y1->row(r);
        }
    }
    out.ground_truth = ground_truth;
    return out;
}

void PODataset::validate() const {
    require(dx() >= 1, "d_x must be at least 1");
    require(dy() >= 1, "d_y must be at least 1");
    require(a.size() == x.rows() && y.rows() == x.rows(), "x, a and y must have the same number of rows");
    for (int i = 0; i < size(); ++i) {
        if (a(i) != 0 && a(i) != 1)
            throw InvalidArgument("row " + std::to_string(i) + ": treatment must be 0 or 1");
        if (!x.row(i).allFinite() || !y.row(i).allFinite())
            throw InvalidArgument("row " + std::to_string(i) + ": non-finite covariate or outcome");
    }
    if (y0.has_value() != y1.has_value()) throw InvalidArgument("joint potential outcomes need both arms");
    if (has_joint_po()) {
        require(y0->rows() == x.rows() && y1->rows() == x.rows(), "joint PO columns must match row count");
        require(y0->cols() == dy() && y1->cols() == dy(), "joint PO columns must have length d_y");
    }
}

ConditioningView::ConditioningView(const PODataset& ds, std::vector<int> mask)
    : ds_(&ds), mask_(std::move(mask)) {
    for (int j : mask_) {
        if (j < 0 || j >= ds.dx())
            throw InvalidArgument("v_mask index " + std::to_string(j) + " out of range [0, " +
                                  std::to_string(ds.dx()) + ")");
    }
    require(!mask_.empty(), "v_mask must select at least one covariate");
}

bool ConditioningView::is_identity() const {
    if (dim() != ds_->dx()) return false;
    for (int j = 0; j < dim(); ++j)
        if (mask_[static_cast<std::size_t>(j)] != j) return false;
    return true;
}

Vector ConditioningView::v(int row) const {
    Vector out(dim());
    for (int j = 0; j < dim(); ++j) out(j) = ds_->x(row, mask_[static_cast<std::size_t>(j)]);
    return out;
}

Matrix ConditioningView::v_rows(std::span<const int> rows) const {
    Matrix out(static_cast<Eigen::Index>(rows.size()), dim());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (int j = 0; j < dim(); ++j)
            out(i, j) = ds_->x(rows[static_cast<std::size_t>(i)], mask_[static_cast<std::size_t>(j)]);
    return out;
}

Vector ConditioningView::project(const Vector& x) const {
    require(x.size() == ds_->dx(), "covariate vector has wrong dimension");
    Vector out(dim());
    for (int j = 0; j < dim(); ++j) out(j) = x(mask_[static_cast<std::size_t>(j)]);
    return out;
}

ConditioningView apply_v_mask(const PODataset& ds, std::vector<int> mask) {
    if (mask.empty()) mask = all_indices(ds.dx());
    return ConditioningView(ds, std::move(mask));
}

std::vector<int> all_indices(int n) {
    std::vector<int> out(static_cast<std::size_t>(n));
    std::iota(out.begin(), out.end(), 0);
    return out;
}

}  // namespace cdpo::data
