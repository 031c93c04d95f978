#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gwsnake/errors.hpp"
#include "gwsnake/random.hpp"
#include "gwsnake/rational.hpp"

namespace gwsnake {

struct H1Report {
  bool passes = false;
  bool proper = false;       // weights nonnegative, sum to one
  bool critical = false;     // mean offspring equals one
  bool has_leaf = false;     // positive weight on zero children
  bool has_branch = false;   // positive weight on two or more children
  int span = 0;              // gcd of the support above zero
  double sigma2 = 0.0;       // offspring variance
  std::vector<std::string> issues;
};

// Offspring distribution with bounded support.  Weights can be carried
// exactly (as rationals) or as doubles; exact weights keep a double shadow
// so sampling and float pipelines never branch.
class OffspringDistribution {
 public:
  static OffspringDistribution from_probs(std::vector<double> probs) {
    OffspringDistribution d;
    d.probs_ = std::move(probs);
    d.finish();
    return d;
  }

  static OffspringDistribution from_rationals(std::vector<Rat> probs) {
    OffspringDistribution d;
    d.exact_ = std::move(probs);
    d.probs_.reserve(d.exact_->size());
    for (const auto& r : *d.exact_) d.probs_.push_back(to_double(r));
    d.finish();
    return d;
  }

  // Comma-separated weights starting at zero children: "1/2,0,1/2" or
  // "0.5,0,0.5".  All-rational tokens select the exact representation.
  static OffspringDistribution from_string(const std::string& text) {
    std::vector<std::string> tokens;
    std::string tok;
    std::istringstream in(text);
    while (std::getline(in, tok, ',')) tokens.push_back(tok);
    if (tokens.empty()) throw ParseError("empty offspring distribution");
    bool exact = true;
    for (const auto& t : tokens) {
      if (t.find_first_of(".eE") != std::string::npos) exact = false;
    }
    if (exact) {
      try {
        std::vector<Rat> probs;
        probs.reserve(tokens.size());
        for (const auto& t : tokens) probs.push_back(parse_rational(t));
        return from_rationals(std::move(probs));
      } catch (const ParseError&) {
        exact = false;  // fall through to the float parser
      }
    }
    std::vector<double> probs;
    probs.reserve(tokens.size());
    for (const auto& t : tokens) {
      try {
        std::size_t used = 0;
        double v = std::stod(t, &used);
        while (used < t.size() && std::isspace(static_cast<unsigned char>(t[used])))
          ++used;
        if (used != t.size()) throw ParseError("");
        probs.push_back(v);
      } catch (...) {
        throw ParseError("bad offspring weight '" + t + "'");
      }
    }
    return from_probs(std::move(probs));
  }

  bool is_exact() const { return exact_.has_value(); }
  int max_children() const { return max_children_; }
  const std::vector<double>& probs() const { return probs_; }

  double prob(int k) const {
    if (k < 0 || k >= static_cast<int>(probs_.size())) return 0.0;
    return probs_[k];
  }

  Rat exact_prob(int k) const {
    if (!exact_) throw InvalidDistribution("no exact weights available");
    if (k < 0 || k >= static_cast<int>(exact_->size())) return Rat(0);
    return (*exact_)[k];
  }

  double mean() const { return mean_; }
  double variance() const { return variance_; }
  int span() const { return span_; }

  H1Report validate_h1() const {
    H1Report r;
    r.span = span_;
    r.sigma2 = variance_;
    r.proper = true;
    for (double p : probs_) {
      if (p < 0.0) {
        r.proper = false;
        r.issues.push_back("negative weight");
        break;
      }
    }
    if (r.proper) {
      if (is_exact()) {
        Rat s(0);
        for (const auto& p : *exact_) s += p;
        if (s != 1) {
          r.proper = false;
          r.issues.push_back("weights sum to " + to_string(s));
        }
      } else {
        double s = std::accumulate(probs_.begin(), probs_.end(), 0.0);
        if (std::abs(s - 1.0) > 1e-12) {
          r.proper = false;
          r.issues.push_back("weights sum to " + std::to_string(s));
        }
      }
    }
    if (is_exact()) {
      Rat m(0);
      for (int k = 0; k < static_cast<int>(exact_->size()); ++k)
        m += Rat(k) * (*exact_)[k];
      r.critical = (m == 1);
    } else {
      r.critical = std::abs(mean_ - 1.0) <= 1e-9;
    }
    if (!r.critical) r.issues.push_back("mean offspring is not one");
    r.has_leaf = prob(0) > 0.0;
    if (!r.has_leaf) r.issues.push_back("no weight on zero children");
    for (int k = 2; k < static_cast<int>(probs_.size()); ++k)
      if (probs_[k] > 0.0) r.has_branch = true;
    if (!r.has_branch) r.issues.push_back("no weight on two or more children");
    r.passes = r.proper && r.critical && r.has_leaf && r.has_branch;
    return r;
  }

  // Inverse-CDF draw; the support is tiny so a linear scan wins.
  int sample(RandomStream& rng) const {
    double u = rng.uniform01();
    double acc = 0.0;
    int last = 0;
    for (int k = 0; k < static_cast<int>(probs_.size()); ++k) {
      if (probs_[k] <= 0.0) continue;
      acc += probs_[k];
      last = k;
      if (u < acc) return k;
    }
    return last;
  }

  std::string describe() const {
    std::string out;
    for (std::size_t k = 0; k < probs_.size(); ++k) {
      if (k) out += ",";
      out += is_exact() ? to_string((*exact_)[k]) : std::to_string(probs_[k]);
    }
    return out;
  }

 private:
  void finish() {
    while (probs_.size() > 1 && probs_.back() == 0.0) {
      probs_.pop_back();
      if (exact_) exact_->pop_back();
    }
    if (probs_.empty()) throw InvalidDistribution("empty offspring weights");
    for (double p : probs_)
      if (!(p >= 0.0) || !std::isfinite(p))
        throw InvalidDistribution("offspring weights must be nonnegative");
    if (exact_) {
      Rat s(0);
      for (const auto& p : *exact_) s += p;
      if (s != 1)
        throw InvalidDistribution("offspring weights sum to " + to_string(s));
    } else {
      double s = std::accumulate(probs_.begin(), probs_.end(), 0.0);
      if (std::abs(s - 1.0) > 1e-12)
        throw InvalidDistribution("offspring weights sum to " +
                                  std::to_string(s));
    }
    max_children_ = static_cast<int>(probs_.size()) - 1;
    mean_ = 0.0;
    double second = 0.0;
    for (int k = 0; k < static_cast<int>(probs_.size()); ++k) {
      mean_ += k * probs_[k];
      second += static_cast<double>(k) * k * probs_[k];
    }
    variance_ = second - mean_ * mean_;
    span_ = 0;
    for (int k = 1; k < static_cast<int>(probs_.size()); ++k)
      if (probs_[k] > 0.0) span_ = std::gcd(span_, k);
  }

  std::vector<double> probs_;
  std::optional<std::vector<Rat>> exact_;
  int max_children_ = 0;
  int span_ = 0;
  double mean_ = 0.0;
  double variance_ = 0.0;
};

}  // namespace gwsnake
