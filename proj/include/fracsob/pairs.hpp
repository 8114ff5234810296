#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "common.hpp"
#include "kernel.hpp"
#include "manifold.hpp"

namespace fracsob {

/// Kernel values K(d_ij) for all off-diagonal pairs of a grid.
///
/// Lattice grids with an isotropic kernel store one value per lattice offset.
/// Other grids cache a dense matrix when N <= kDenseLimit, else evaluate on demand.
class PairKernel {
public:
    static constexpr std::size_t kDenseLimit = 4096;

    PairKernel(GridPtr grid, KernelSpec spec) : grid_(std::move(grid)), spec_(std::move(spec)) {
        if (!grid_) throw ShapeError("PairKernel: null grid");
        spec_.validate();
        const std::size_t n = grid_->count();
        if (grid_->is_lattice() && spec_.isotropic()) {
            mode_ = Mode::lattice;
            res_ = static_cast<std::size_t>(grid_->lattice_res);
            dim_ = grid_->manifold.dim;
            const double h = grid_->spacing();
            table_.assign(n, 0.0);
            dist_.assign(n, 0.0);
            auto wrapped = [&](std::size_t o) { return static_cast<double>(std::min(o, res_ - o)); };
            if (dim_ == 1) {
                for (std::size_t o = 1; o < res_; ++o) {
                    dist_[o] = wrapped(o) * h;
                    table_[o] = eval_kernel(spec_, dist_[o]);
                }
            } else {
                for (std::size_t a = 0; a < res_; ++a)
                    for (std::size_t b = 0; b < res_; ++b) {
                        if (a == 0 && b == 0) continue;
                        const std::size_t o = a * res_ + b;
                        dist_[o] = std::hypot(wrapped(a) * h, wrapped(b) * h);
                        table_[o] = eval_kernel(spec_, dist_[o]);
                    }
            }
        } else if (n <= kDenseLimit) {
            mode_ = Mode::dense;
            table_.assign(n * n, 0.0);
            dist_.assign(n * n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    const auto& x = grid_->points[i];
                    const auto& y = grid_->points[j];
                    const double d = geodesic_distance(grid_->manifold, x, y);
                    const double k = eval_kernel(spec_, x, y, d);
                    table_[i * n + j] = table_[j * n + i] = k;
                    dist_[i * n + j] = dist_[j * n + i] = d;
                }
        } else {
            mode_ = Mode::on_demand;
        }
    }

    [[nodiscard]] const Grid& grid() const { return *grid_; }
    [[nodiscard]] const GridPtr& grid_ptr() const { return grid_; }
    [[nodiscard]] const KernelSpec& spec() const { return spec_; }
    [[nodiscard]] std::size_t size() const { return grid_->count(); }
    [[nodiscard]] bool is_lattice() const { return mode_ == Mode::lattice; }
    /// K between node 0 and each node (one entry per lattice offset); lattice mode only.
    [[nodiscard]] const std::vector<double>& offset_table() const { return table_; }

    [[nodiscard]] double distance(std::size_t i, std::size_t j) const {
        switch (mode_) {
            case Mode::lattice: return dist_[offset(i, j)];
            case Mode::dense: return dist_[i * size() + j];
            case Mode::on_demand: break;
        }
        return geodesic_distance(grid_->manifold, grid_->points[i], grid_->points[j]);
    }

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
        switch (mode_) {
            case Mode::lattice: return table_[offset(i, j)];
            case Mode::dense: return table_[i * size() + j];
            case Mode::on_demand: break;
        }
        const auto& x = grid_->points[i];
        const auto& y = grid_->points[j];
        return eval_kernel(spec_, x, y, geodesic_distance(grid_->manifold, x, y));
    }

    /// f(j, K_ij) for j in (i, N).
    template <class F>
    void row_upper(std::size_t i, F&& f) const {
        visit_row(i, i + 1, f);
    }

    /// f(j, K_ij) for every j != i.
    template <class F>
    void row_full(std::size_t i, F&& f) const {
        visit_row(i, 0, f);
    }

private:
    enum class Mode { lattice, dense, on_demand };

    [[nodiscard]] std::size_t offset(std::size_t i, std::size_t j) const {
        if (dim_ == 1) return (j + res_ - i) % res_;
        const std::size_t ia = i / res_, ib = i % res_, ja = j / res_, jb = j % res_;
        return ((ja + res_ - ia) % res_) * res_ + (jb + res_ - ib) % res_;
    }

    template <class F>
    void visit_row(std::size_t i, std::size_t j0, F& f) const {
        const std::size_t n = size();
        if (mode_ == Mode::dense) {
            const double* row = &table_[i * n];
            for (std::size_t j = j0; j < n; ++j)
                if (j != i) f(j, row[j]);
            return;
        }
        if (mode_ == Mode::on_demand) {
            for (std::size_t j = j0; j < n; ++j)
                if (j != i) f(j, (*this)(i, j));
            return;
        }
        if (dim_ == 1) {
            for (std::size_t j = j0; j < n; ++j)
                if (j != i) f(j, table_[j >= i ? j - i : j + res_ - i]);
            return;
        }
        const std::size_t ia = i / res_, ib = i % res_;
        const std::size_t a0 = j0 / res_;
        for (std::size_t a = a0; a < res_; ++a) {
            const std::size_t oa = (a + res_ - ia) % res_;
            const double* trow = &table_[oa * res_];
            const std::size_t base = a * res_;
            std::size_t b = (a == a0) ? j0 % res_ : 0;
            for (; b < ib && b < res_; ++b) f(base + b, trow[b + res_ - ib]);
            for (; b < res_; ++b) {
                if (base + b == i) continue;
                f(base + b, trow[b - ib]);
            }
        }
    }

    GridPtr grid_;
    KernelSpec spec_;
    Mode mode_ = Mode::on_demand;
    std::size_t res_ = 0;
    int dim_ = 1;
    std::vector<double> table_;
    std::vector<double> dist_;
};

}  // namespace fracsob
