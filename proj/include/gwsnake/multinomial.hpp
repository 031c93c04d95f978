#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gwsnake/errors.hpp"
#include "gwsnake/offspring.hpp"
#include "gwsnake/random.hpp"
#include "gwsnake/rational.hpp"

namespace gwsnake {

// Index set {(k,j) : 1 <= j <= k <= K} in lexicographic order, with cell
// weights p_{k,j} = mu_k.  For critical mu the weights sum to one, making
// the set a categorical alphabet.
class IndexSetIK {
 public:
  explicit IndexSetIK(const OffspringDistribution& mu)
      : K_(mu.max_children()) {
    weights_.reserve(size());
    for (int k = 1; k <= K_; ++k)
      for (int j = 1; j <= k; ++j) weights_.push_back(mu.prob(k));
    if (mu.is_exact()) {
      exact_weights_.emplace();
      exact_weights_->reserve(size());
      for (int k = 1; k <= K_; ++k)
        for (int j = 1; j <= k; ++j) exact_weights_->push_back(mu.exact_prob(k));
    }
  }

  int max_children() const { return K_; }
  std::size_t size() const {
    return static_cast<std::size_t>(K_) * (K_ + 1) / 2;
  }

  static std::size_t flat_index(int k, int j) {
    return static_cast<std::size_t>(k) * (k - 1) / 2 + (j - 1);
  }

  std::pair<int, int> cell(std::size_t i) const {
    int k = 1;
    while (flat_index(k + 1, 1) <= i) ++k;
    int j = static_cast<int>(i - flat_index(k, 1)) + 1;
    return {k, j};
  }

  double weight(int k, int j) const { return weights_[flat_index(k, j)]; }
  double weight_at(std::size_t i) const { return weights_[i]; }
  bool is_exact() const { return exact_weights_.has_value(); }
  Rat exact_weight_at(std::size_t i) const {
    if (!exact_weights_) throw InvalidDistribution("no exact weights");
    return (*exact_weights_)[i];
  }

 private:
  int K_;
  std::vector<double> weights_;
  std::optional<std::vector<Rat>> exact_weights_;
};

// Nonnegative integer counts over I_K.
struct ContentVector {
  int K = 0;
  std::vector<int> counts;

  ContentVector() = default;
  explicit ContentVector(int kmax)
      : K(kmax),
        counts(static_cast<std::size_t>(kmax) * (kmax + 1) / 2, 0) {}

  int at(int k, int j) const { return counts[IndexSetIK::flat_index(k, j)]; }
  int& ref(int k, int j) { return counts[IndexSetIK::flat_index(k, j)]; }

  long long total() const {
    long long h = 0;
    for (int c : counts) h += c;
    return h;
  }

  bool operator==(const ContentVector& o) const { return counts == o.counts; }
  bool operator<(const ContentVector& o) const { return counts < o.counts; }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (int k = 1; k <= K; ++k)
      for (int jj = 1; jj <= k; ++jj) {
        int c = at(k, jj);
        if (c != 0)
          j[std::to_string(k) + "," + std::to_string(jj)] = c;
      }
    return j;
  }

  static ContentVector from_json(const nlohmann::json& j, int kmax) {
    if (!j.is_object()) throw ParseError("content vector JSON must be a map");
    ContentVector a(kmax);
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      auto comma = key.find(',');
      if (comma == std::string::npos)
        throw ParseError("content key '" + key + "' is not 'k,j'");
      int k = 0, jj = 0;
      try {
        k = std::stoi(key.substr(0, comma));
        jj = std::stoi(key.substr(comma + 1));
      } catch (...) {
        throw ParseError("content key '" + key + "' is not 'k,j'");
      }
      if (k < 1 || jj < 1 || jj > k || k > kmax)
        throw ParseError("content key '" + key + "' outside the index set");
      if (!it.value().is_number_integer() || it.value().get<long long>() < 0)
        throw ParseError("content counts must be nonnegative integers");
      a.ref(k, jj) = it.value().get<int>();
    }
    return a;
  }
};

// N1 counts subtrees hanging left of the ancestral line, N2 right.
inline std::pair<long long, long long> n1_n2(const ContentVector& a) {
  long long n1 = 0, n2 = 0;
  for (int k = 1; k <= a.K; ++k)
    for (int j = 1; j <= k; ++j) {
      long long c = a.at(k, j);
      n1 += static_cast<long long>(j - 1) * c;
      n2 += static_cast<long long>(k - j) * c;
    }
  return {n1, n2};
}

inline double q_h_pmf(const IndexSetIK& ik, const ContentVector& a) {
  long long h = a.total();
  double log_coeff = std::lgamma(static_cast<double>(h) + 1.0);
  double log_prob = 0.0;
  for (std::size_t i = 0; i < ik.size(); ++i) {
    int c = a.counts[i];
    if (c == 0) continue;
    double p = ik.weight_at(i);
    if (p == 0.0) return 0.0;
    log_coeff -= std::lgamma(static_cast<double>(c) + 1.0);
    log_prob += c * std::log(p);
  }
  return std::exp(log_coeff + log_prob);
}

inline Rat q_h_pmf_exact(const IndexSetIK& ik, const ContentVector& a) {
  BigInt coeff = 1;
  long long used = 0;
  Rat prob(1);
  for (std::size_t i = 0; i < ik.size(); ++i) {
    int c = a.counts[i];
    if (c == 0) continue;
    Rat p = ik.exact_weight_at(i);
    if (p == 0) return Rat(0);
    // binomial(used + c, c) folded in one cell at a time keeps every
    // intermediate an integer
    for (int t = 1; t <= c; ++t) {
      ++used;
      coeff *= used;
      coeff /= t;
    }
    for (int t = 0; t < c; ++t) prob *= p;
  }
  return Rat(coeff) * prob;
}

// h categorical draws over the positive cells.
inline ContentVector sample_multinomial(const IndexSetIK& ik, long long h,
                                        RandomStream& rng) {
  ContentVector a(ik.max_children());
  std::vector<std::size_t> cells;
  std::vector<double> cdf;
  double acc = 0.0;
  for (std::size_t i = 0; i < ik.size(); ++i) {
    double p = ik.weight_at(i);
    if (p > 0.0) {
      acc += p;
      cells.push_back(i);
      cdf.push_back(acc);
    }
  }
  for (long long t = 0; t < h; ++t) {
    double u = rng.uniform01() * acc;
    std::size_t lo = 0;
    while (lo + 1 < cdf.size() && u >= cdf[lo]) ++lo;
    ++a.counts[cells[lo]];
  }
  return a;
}

// Centered, n^{-1/4}-scaled count vector.
inline std::vector<double> g_statistic(const IndexSetIK& ik,
                                       const ContentVector& m, long long n) {
  long long h = m.total();
  double scale = std::pow(static_cast<double>(n), -0.25);
  std::vector<double> out(ik.size());
  for (std::size_t i = 0; i < ik.size(); ++i)
    out[i] = (m.counts[i] - ik.weight_at(i) * h) * scale;
  return out;
}

// -p p^T + diag(p): the limit covariance of the centered multinomial
// direction; singular along the all-ones vector when the weights sum to 1.
inline Eigen::MatrixXd limit_covariance(const IndexSetIK& ik) {
  auto d = static_cast<Eigen::Index>(ik.size());
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) {
      double v = -ik.weight_at(r) * ik.weight_at(c);
      if (r == c) v += ik.weight_at(r);
      m(r, c) = v;
    }
  return m;
}

inline std::vector<Rat> limit_covariance_row_sums_exact(const IndexSetIK& ik) {
  std::vector<Rat> sums(ik.size(), Rat(0));
  for (std::size_t r = 0; r < ik.size(); ++r) {
    Rat acc(0);
    for (std::size_t c = 0; c < ik.size(); ++c) {
      Rat v = -ik.exact_weight_at(r) * ik.exact_weight_at(c);
      if (r == c) v += ik.exact_weight_at(r);
      acc += v;
    }
    sums[r] = acc;
  }
  return sums;
}

// Concentration window for N1 and N2 at total h.
inline bool in_j_h(const OffspringDistribution& mu, const ContentVector& a) {
  long long h = a.total();
  if (h < 1) throw InvalidArgs("window needs total h >= 1");
  double center = mu.variance() * static_cast<double>(h) / 2.0;
  double radius = std::pow(static_cast<double>(h), 2.0 / 3.0);
  auto [x1, x2] = n1_n2(a);
  return std::abs(x1 - center) <= radius && std::abs(x2 - center) <= radius;
}

// All content vectors with total h supported on the positive-weight cells.
inline std::vector<ContentVector> enumerate_contents(const IndexSetIK& ik,
                                                     long long h) {
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < ik.size(); ++i)
    if (ik.weight_at(i) > 0.0) cells.push_back(i);
  std::vector<ContentVector> out;
  ContentVector work(ik.max_children());
  auto rec = [&](auto&& self, std::size_t pos, long long left) -> void {
    if (pos + 1 == cells.size()) {
      work.counts[cells[pos]] = static_cast<int>(left);
      out.push_back(work);
      work.counts[cells[pos]] = 0;
      return;
    }
    for (long long c = 0; c <= left; ++c) {
      work.counts[cells[pos]] = static_cast<int>(c);
      self(self, pos + 1, left - c);
    }
    work.counts[cells[pos]] = 0;
  };
  if (cells.empty()) {
    if (h == 0) out.push_back(work);
    return out;
  }
  rec(rec, 0, h);
  return out;
}

// Exact laws of N1 and N2 under the multinomial with total h.
inline std::map<long long, Rat> exact_n_law(const IndexSetIK& ik, long long h,
                                            int which) {
  std::map<long long, Rat> law;
  for (const auto& a : enumerate_contents(ik, h)) {
    Rat q = q_h_pmf_exact(ik, a);
    if (q == 0) continue;
    auto [x1, x2] = n1_n2(a);
    law[which == 1 ? x1 : x2] += q;
  }
  return law;
}

}  // namespace gwsnake
