#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace focus::oracle {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<std::size_t> redundancy(const Matrix& features, std::size_t w) {
  std::vector<std::size_t> kept;
  const std::size_t n = features.rows();
  for (std::size_t start = 0; start < n; start += w) {
    const std::size_t len = std::min(w, n - start);
    if (len == 1) {
      kept.push_back(start);
      continue;
    }
    std::vector<std::vector<double>> s(len, std::vector<double>(len));
    double total = 0;
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) {
        s[i][j] = cosine(features.row(start + i), features.row(start + j));
        total += s[i][j];
      }
    }
    const double count = static_cast<double>(len * len);
    const double mu = total / count;
    double sq = 0;
    for (const auto& row : s)
      for (double v : row) sq += (v - mu) * (v - mu);
    const double tau = mu + std::sqrt(sq / count);
    std::vector<double> r(len);
    for (std::size_t i = 0; i < len; ++i) {
      r[i] = std::accumulate(s[i].begin(), s[i].end(), 0.0) / static_cast<double>(len);
    }
    bool any = false;
    for (std::size_t i = 0; i < len; ++i) {
      if (!(r[i] > tau)) {
        kept.push_back(start + i);
        any = true;
      }
    }
    if (!any) {
      kept.push_back(start + static_cast<std::size_t>(
                                 std::min_element(r.begin(), r.end()) - r.begin()));
    }
  }
  return kept;
}

std::vector<double> relevance(const Matrix& tokens, const Matrix& prompts, const Matrix& wq,
                              const Matrix& wk) {
  const std::size_t d = tokens.cols();
  auto multiply = [](const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) {
        double s = 0;
        for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
        c(i, j) = s;
      }
    return c;
  };
  const Matrix q = multiply(prompts, wq);
  const Matrix k = multiply(tokens, wk);
  std::vector<double> r(tokens.rows(), 0.0);
  for (std::size_t j = 0; j < q.rows(); ++j) {
    std::vector<double> logits(tokens.rows());
    for (std::size_t i = 0; i < tokens.rows(); ++i) {
      double s = 0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q(j, c) * k(i, c);
      logits[i] = s / std::sqrt(static_cast<double>(d));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (double& v : logits) z += (v = std::exp(v - mx));
    for (std::size_t i = 0; i < tokens.rows(); ++i) r[i] += logits[i] / z;
  }
  for (double& v : r) v /= static_cast<double>(q.rows());
  return r;
}

std::vector<std::size_t> topk(const std::vector<double>& relevance, double gamma,
                              std::size_t m_max) {
  const std::size_t n = relevance.size();
  std::size_t k = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n) + 1e-9));
  k = std::min(m_max, std::max<std::size_t>(1, k));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return relevance[a] > relevance[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::vector<std::size_t>> sequential(const Matrix& tokens,
                                                 const std::vector<double>& thresholds) {
  std::vector<std::size_t> current(tokens.rows());
  std::iota(current.begin(), current.end(), 0);
  std::vector<std::vector<std::size_t>> out;
  for (double theta : thresholds) {
    const std::size_t n = current.size();
    if (n <= 1) {
      out.push_back(current);
      continue;
    }
    auto sim = [&](std::size_t j) {
      return std::clamp(cosine(tokens.row(current[j]), tokens.row(current[j + 1])), -1.0, 1.0);
    };
    std::vector<std::size_t> next;
    std::vector<double> max_sim(n);
    for (std::size_t j = 0; j < n; ++j) {
      double lo = 2, hi = -2;
      if (j > 0) {
        lo = std::min(lo, sim(j - 1));
        hi = std::max(hi, sim(j - 1));
      }
      if (j + 1 < n) {
        lo = std::min(lo, sim(j));
        hi = std::max(hi, sim(j));
      }
      max_sim[j] = hi;
      if (lo < theta) next.push_back(current[j]);
    }
    if (next.empty()) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < n; ++j)
        if (max_sim[j] < max_sim[best]) best = j;
      next.push_back(current[best]);
    }
    current = next;
    out.push_back(current);
  }
  return out;
}

CompressionTrace pipeline_trace(const FeatureBag& bag, const Matrix& prompts, std::size_t w,
                                double gamma, std::size_t m_max,
                                const std::vector<double>& thresholds) {
  CompressionTrace trace;
  trace.input_indices = bag.patch_indices;
  auto original = [&](const std::vector<std::size_t>& pos) {
    std::vector<std::uint64_t> idx;
    for (auto p : pos) idx.push_back(bag.patch_indices[p]);
    return idx;
  };
  // Stage 1
  const auto kept1 = redundancy(bag.features, w);
  double tau_sum = 0;
  std::size_t windows = 0;
  for (std::size_t start = 0; start < bag.size(); start += w) {
    const std::size_t len = std::min(w, bag.size() - start);
    if (len < 2) continue;
    std::vector<double> all;
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < len; ++j)
        all.push_back(cosine(bag.features.row(start + i), bag.features.row(start + j)));
    double mu = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    double sq = 0;
    for (double v : all) sq += (v - mu) * (v - mu);
    tau_sum += mu + std::sqrt(sq / static_cast<double>(all.size()));
    ++windows;
  }
  StageRecord r1;
  r1.stage_name = "redundancy";
  r1.threshold_used = windows ? tau_sum / static_cast<double>(windows) : std::nan("");
  r1.input_size = bag.size();
  r1.retained_original_indices = original(kept1);
  trace.stage_records.push_back(r1);

  // Stage 2
  const Matrix b1 = bag.features.select_rows(kept1);
  const Matrix eye = Matrix::identity(bag.dim());
  const auto rel = relevance(b1, prompts, eye, eye);
  const auto sel = topk(rel, gamma, m_max);
  double cutoff = rel[sel[0]];
  for (auto p : sel) cutoff = std::min(cutoff, rel[p]);
  std::vector<std::size_t> pos2;
  for (auto p : sel) pos2.push_back(kept1[p]);
  StageRecord r2;
  r2.stage_name = "prioritize";
  r2.threshold_used = cutoff;
  r2.input_size = kept1.size();
  r2.retained_original_indices = original(pos2);
  trace.stage_records.push_back(r2);

  // Stage 3
  const Matrix b2 = bag.features.select_rows(pos2);
  const auto stages = sequential(b2, thresholds);
  std::size_t input = pos2.size();
  for (std::size_t s = 0; s < stages.size(); ++s) {
    std::vector<std::size_t> pos3;
    for (auto p : stages[s]) pos3.push_back(pos2[p]);
    StageRecord r;
    r.stage_name = "svtc." + std::to_string(s);
    r.threshold_used = thresholds[s];
    r.input_size = input;
    r.retained_original_indices = original(pos3);
    input = pos3.size();
    trace.stage_records.push_back(r);
  }
  return trace;
}

Matrix gaussian(std::size_t rows, std::size_t cols, CounterRng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

FeatureBag clustered_bag(std::size_t n, std::size_t d, CounterRng& rng) {
  FeatureBag bag;
  bag.id = "clustered";
  bag.features = Matrix(n, d);
  std::size_t i = 0;
  while (i < n) {
    const std::size_t run = 1 + static_cast<std::size_t>(rng.below(6));
    std::vector<double> base(d);
    for (auto& v : base) v = rng.normal();
    for (std::size_t r = 0; r < run && i < n; ++r, ++i) {
      for (std::size_t c = 0; c < d; ++c) bag.features(i, c) = base[c] + 0.05 * rng.normal();
    }
  }
  for (std::size_t j = 0; j < n; ++j) bag.patch_indices.push_back(3 * j + 1);
  return bag;
}

}  // namespace focus::oracle
