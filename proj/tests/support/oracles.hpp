#pragma once

// Brute-force reference implementations used as test oracles. They share no
// code with the library beyond the Matrix container.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "focus/matrix.hpp"
#include "focus/rng.hpp"
#include "focus/types.hpp"

namespace focus::oracle {

double cosine(std::span<const double> a, std::span<const double> b);

// Global redundancy filter: kept row positions.
std::vector<std::size_t> redundancy(const Matrix& features, std::size_t w);

// Relevance r_i = column mean of softmax((T Wq)(B Wk)^T / sqrt(d)).
std::vector<double> relevance(const Matrix& tokens, const Matrix& prompts, const Matrix& wq,
                              const Matrix& wk);
// Top-k positions in ascending order (ties toward the lower position).
std::vector<std::size_t> topk(const std::vector<double>& relevance, double gamma,
                              std::size_t m_max);

// Sequential compression: kept positions after each stage.
std::vector<std::vector<std::size_t>> sequential(const Matrix& tokens,
                                                 const std::vector<double>& thresholds);

// Full trace of the three stages for a bag, with identity projections.
CompressionTrace pipeline_trace(const FeatureBag& bag, const Matrix& prompts, std::size_t w,
                                double gamma, std::size_t m_max,
                                const std::vector<double>& thresholds);

// Gaussian matrix with unit-variance entries.
Matrix gaussian(std::size_t rows, std::size_t cols, CounterRng& rng);

// Bag mixing Gaussian rows with near-duplicate runs, so every stage has work.
FeatureBag clustered_bag(std::size_t n, std::size_t d, CounterRng& rng);

}  // namespace focus::oracle
