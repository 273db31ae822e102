#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "bsdelab/forward_sde.hpp"

namespace bsdelab {

// Uniform box partition in at most two dimensions.
struct BinSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<std::size_t> bins;

    std::size_t dim() const { return bins.size(); }
    std::size_t total() const;
    double width(std::size_t j) const { return (hi[j] - lo[j]) / static_cast<double>(bins[j]); }
    // Flat index of the bin holding x, or total() when x is outside the box.
    std::size_t locate(std::span<const double> x) const;
    std::vector<double> center(std::size_t flat) const;
    bool operator==(const BinSpec&) const = default;
};

// `count` bins per dimension over mean +- 5 sd of the states at `node`.
BinSpec default_bins(const PathEnsemble& ensemble, std::size_t node, std::size_t count = 101);

struct EmpiricalLaw {
    double s = 0.0;
    BinSpec bins;
    std::vector<double> mass;
    double outside = 0.0;
    std::size_t samples = 0;
};

// Histogram of X_s; s must be a grid node.
EmpiricalLaw estimate_law(const PathEnsemble& ensemble, double s, const BinSpec& bins);

struct RatioField {
    double s = 0.0;
    BinSpec bins;
    std::vector<double> ratio;
    std::vector<unsigned char> violation;  // numerator mass on a bin the base law never visits
    std::vector<double> base_mass;

    std::size_t violations() const;
};

// Binwise mass ratio law_tx / law_base. Zero over zero is 0.
RatioField density_ratio(const EmpiricalLaw& law_tx, const EmpiricalLaw& law_base);

// Numerator law rebuilt as ratio x base mass. Masses live on the lattice
// count / samples, so rounding to it recovers the histogram exactly.
EmpiricalLaw reconstruct_law(const RatioField& field, const EmpiricalLaw& base, std::size_t samples);

struct RatioSeries {
    std::vector<RatioField> fields;
    std::vector<double> weights;  // dt of each node, left Riemann rule
};

// Ratios at every node s in [t + delta, T) of the ensemble grids.
RatioSeries ratio_series(const PathEnsemble& from_tx, const PathEnsemble& from_base, double t, double delta,
                         const BinSpec& bins);

struct LqNorm {
    double value = 0.0;
    bool infinite = false;  // violation bins inside the compact
};

// (sum over nodes and bins with centers in [-k, k]^m of |phi|^q nu0-mass dt)^(1/q).
LqNorm lq_norm(const RatioSeries& series, double q, double compact_k);

void write_ratio_csv(const std::filesystem::path& file, const RatioSeries& series);

}  // namespace bsdelab
