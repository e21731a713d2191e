#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "costknock/errors.hpp"

namespace costknock {

/// Per-feature integer costs. Feature j gets omega_j - 1 knockoff copies, so
/// every cost must be an integer >= 2 (the original plus at least one copy).
class CostVector {
public:
    CostVector() = default;

    explicit CostVector(std::vector<int> omega) : omega_(std::move(omega)) {
        for (std::size_t j = 0; j < omega_.size(); ++j) {
            if (omega_[j] < 2) {
                throw input_error("cost omega[" + std::to_string(j + 1) + "] = " +
                                  std::to_string(omega_[j]) +
                                  " violates the omega_j >= 2 requirement");
            }
        }
    }

    static CostVector uniform(int p, int omega) {
        return CostVector(std::vector<int>(static_cast<std::size_t>(p), omega));
    }

    int size() const { return static_cast<int>(omega_.size()); }
    int operator[](int j) const { return omega_[static_cast<std::size_t>(j)]; }
    const std::vector<int>& values() const { return omega_; }

    /// Total augmented dimension W = sum_j omega_j (originals plus copies).
    int total_width() const { return std::accumulate(omega_.begin(), omega_.end(), 0); }

    int max_cost() const {
        int m = 2;
        for (int w : omega_) m = std::max(m, w);
        return m;
    }

private:
    std::vector<int> omega_;
};

/// Bijection between (feature j, copy l) pairs and flat column indices of the
/// augmented design. Layout is feature-major, copy-minor: group j occupies a
/// contiguous block of omega_j columns and copy 0 is the original feature.
/// All indices are 0-based.
class IndexMap {
public:
    IndexMap() = default;

    explicit IndexMap(const CostVector& omega) : omega_(omega.values()) {
        offsets_.resize(omega_.size() + 1, 0);
        for (std::size_t j = 0; j < omega_.size(); ++j) {
            offsets_[j + 1] = offsets_[j] + omega_[j];
        }
    }

    int num_features() const { return static_cast<int>(omega_.size()); }
    int total_width() const { return offsets_.empty() ? 0 : offsets_.back(); }
    int group_size(int j) const { return omega_[static_cast<std::size_t>(j)]; }

    /// Flat column of copy l (0 = original) of feature j.
    int flat(int j, int l) const {
        if (j < 0 || j >= num_features() || l < 0 || l >= group_size(j)) {
            throw input_error("index map lookup out of range");
        }
        return offsets_[static_cast<std::size_t>(j)] + l;
    }

    int group_of(int flat_index) const {
        if (flat_index < 0 || flat_index >= total_width()) {
            throw input_error("flat index out of range");
        }
        int j = 0;
        while (offsets_[static_cast<std::size_t>(j) + 1] <= flat_index) ++j;
        return j;
    }

    int copy_of(int flat_index) const {
        const int j = group_of(flat_index);
        return flat_index - offsets_[static_cast<std::size_t>(j)];
    }

    /// Flat columns holding the originals (copy 0 of every group).
    std::vector<int> original_columns() const {
        std::vector<int> cols(omega_.size());
        for (std::size_t j = 0; j < omega_.size(); ++j) cols[j] = offsets_[j];
        return cols;
    }

    /// Flat columns holding knockoff copies (copy >= 1), in layout order.
    std::vector<int> knockoff_columns() const {
        std::vector<int> cols;
        cols.reserve(static_cast<std::size_t>(total_width()) - omega_.size());
        for (std::size_t j = 0; j < omega_.size(); ++j) {
            for (int l = 1; l < omega_[j]; ++l) cols.push_back(offsets_[j] + l);
        }
        return cols;
    }

private:
    std::vector<int> omega_;
    std::vector<int> offsets_;
};

inline IndexMap build_index_map(const CostVector& omega) { return IndexMap(omega); }

} // namespace costknock
