#pragma once

// Independent reference implementations used as test oracles. They favour
// the most literal formulation (nested loops, brute force) over speed.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "crashxai/analytics.hpp"
#include "crashxai/attribution.hpp"
#include "crashxai/narrator.hpp"
#include "crashxai/refmodel.hpp"
#include "crashxai/schema.hpp"
#include "crashxai/util.hpp"

namespace oracle {

using namespace crashxai;

// Nested-loop join: each crash scans every segment, vehicle and person row.
inline std::vector<CrashCase> join(const TableSet& t) {
  std::vector<CrashCase> out;
  for (const auto& c : t.crashes) {
    CrashCase cc;
    cc.crash = c;
    for (const auto& s : t.segments) {
      if (s.route_id == c.route_id && s.from_measure <= c.milepost && c.milepost < s.to_measure) {
        if (!cc.segment || s.from_measure < cc.segment->from_measure) cc.segment = s;
      }
    }
    std::vector<VehicleRecord> vs;
    for (const auto& v : t.vehicles) {
      if (v.caseno == c.caseno) vs.push_back(v);
    }
    std::stable_sort(vs.begin(), vs.end(),
                     [](const auto& a, const auto& b) { return a.unit_id < b.unit_id; });
    for (const auto& v : vs) {
      Unit u{v, {}};
      for (const auto& p : t.persons) {
        if (p.caseno == v.caseno && p.unit_id == v.unit_id) u.persons.push_back(p);
      }
      cc.units.push_back(u);
    }
    out.push_back(cc);
  }
  return out;
}

// Random table set with unique casenos and unique (caseno, unit_id); a share
// of children point at missing parents and some mileposts sit on segment
// boundaries.
inline TableSet random_tables(Rng& rng) {
  TableSet t;
  const std::vector<std::string> routes{"097ARi", "542i", "002i"};
  for (const auto& r : routes) {
    double at = static_cast<double>(rng.index(5));
    const std::size_t n = 1 + rng.index(4);
    for (std::size_t k = 0; k < n; ++k) {
      RoadSegment s;
      s.route_id = r;
      s.from_measure = at;
      s.to_measure = at + 1.0 + static_cast<double>(rng.index(10));
      s.lane_count = 1 + static_cast<int>(rng.index(4));
      if (rng.index(2)) s.aadt = static_cast<long long>(rng.index(50000));
      // occasional overlap with the previous segment
      at = rng.index(5) == 0 ? s.to_measure - 0.5 : s.to_measure + static_cast<double>(rng.index(2));
      t.segments.push_back(s);
    }
  }
  const std::size_t ncrash = 1 + rng.index(12);
  for (std::size_t i = 0; i < ncrash; ++i) {
    CrashRecord c;
    c.caseno = "C" + std::to_string(i);
    c.route_id = routes[rng.index(routes.size())];
    const auto& s = t.segments[rng.index(t.segments.size())];
    switch (rng.index(4)) {
      case 0: c.milepost = s.from_measure; break;
      case 1: c.milepost = s.to_measure; break;
      default: c.milepost = std::round(rng.uniform(0.0, 40.0) * 10.0) / 10.0;
    }
    c.severity = rng.index(3) == 0 ? Severity::SeriousOrFatal : Severity::NoApparentOrMinor;
    t.crashes.push_back(c);
  }
  const std::size_t nveh = rng.index(20);
  std::set<std::pair<std::string, int>> used;
  for (std::size_t i = 0; i < nveh; ++i) {
    VehicleRecord v;
    v.caseno = "C" + std::to_string(rng.index(ncrash + 2));
    v.unit_id = 1 + static_cast<int>(rng.index(4));
    if (!used.insert({v.caseno, v.unit_id}).second) continue;
    v.make = "M" + std::to_string(i);
    t.vehicles.push_back(v);
  }
  const std::size_t nper = rng.index(30);
  for (std::size_t i = 0; i < nper; ++i) {
    PersonRecord p;
    p.caseno = "C" + std::to_string(rng.index(ncrash + 2));
    p.unit_id = 1 + static_cast<int>(rng.index(4));
    p.age = static_cast<int>(i);
    t.persons.push_back(p);
  }
  return t;
}

// Score normalization written as an explicit per-element loop.
inline ScoreMatrix normalize(const Eigen::MatrixXd& I, int L, int b) {
  ScoreMatrix S = ScoreMatrix::Zero(I.rows(), I.cols());
  for (Eigen::Index m = 0; m < I.cols(); ++m) {
    double mx = -INFINITY;
    for (Eigen::Index n = 0; n < I.rows(); ++n) mx = std::max(mx, I(n, m));
    if (!(mx > 0.0)) continue;
    for (Eigen::Index n = 0; n < I.rows(); ++n) {
      const double ratio = I(n, m) / mx;
      const double s = std::ceil(static_cast<double>(L) * ratio);
      S(n, m) = s > static_cast<double>(b) ? static_cast<int>(s) : 0;
    }
  }
  return S;
}

// Forward pass over explicit per-position input vectors (rows of X).
inline double prob_from_inputs(const TinyLM& m, const Eigen::MatrixXd& X, int target) {
  const auto n = X.rows();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(m.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto from_end = n - 1 - i;
    const auto slot = std::min<Eigen::Index>(from_end, m.window() - 1);
    h += m.position(slot) * X.row(i).transpose();
  }
  h /= static_cast<double>(n);
  Eigen::VectorXd z(h.size());
  for (Eigen::Index k = 0; k < h.size(); ++k) z(k) = std::tanh(h(k));
  Eigen::VectorXd logits = m.bias;
  for (Eigen::Index v = 0; v < m.vocab_size(); ++v) {
    for (Eigen::Index k = 0; k < z.size(); ++k) logits(v) += m.output(k, v) * z(k);
  }
  double mx = logits.maxCoeff(), sum = 0.0;
  for (Eigen::Index v = 0; v < logits.size(); ++v) sum += std::exp(logits(v) - mx);
  return std::exp(logits(target) - mx) / sum;
}

inline Eigen::MatrixXd inputs_of(const TinyLM& m, const std::vector<int>& ctx) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(ctx.size()), m.dim());
  for (std::size_t i = 0; i < ctx.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = m.embedding.row(ctx[i]);
  return X;
}

// Central finite differences of p(target) with respect to every entry of X.
inline Eigen::MatrixXd fd_gradient(const TinyLM& m, const std::vector<int>& ctx, int target,
                                   double step = 1e-4) {
  Eigen::MatrixXd X = inputs_of(m, ctx);
  Eigen::MatrixXd G(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      const double keep = X(i, k);
      X(i, k) = keep + step;
      const double up = prob_from_inputs(m, X, target);
      X(i, k) = keep - step;
      const double down = prob_from_inputs(m, X, target);
      X(i, k) = keep;
      G(i, k) = (up - down) / (2.0 * step);
    }
  }
  return G;
}

// max |a - f| / max |f|
inline double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  const double scale = fd.cwiseAbs().maxCoeff();
  const double diff = (analytic - fd).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

// Occlusion by literal re-evaluation of the model on each edited context.
inline Eigen::MatrixXd occlusion(const TinyLM& m, const std::vector<int>& x,
                                 const std::vector<int>& y) {
  Eigen::MatrixXd I = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size() + y.size()),
                                            static_cast<Eigen::Index>(y.size()));
  for (std::size_t j = 0; j < y.size(); ++j) {
    std::vector<int> z(x);
    for (std::size_t k = 0; k < j; ++k) z.push_back(y[k]);
    const double base = prob_from_inputs(m, inputs_of(m, z), y[j]);
    for (std::size_t n = 0; n < z.size(); ++n) {
      std::vector<int> cut;
      for (std::size_t k = 0; k < z.size(); ++k) {
        if (k != n) cut.push_back(z[k]);
      }
      if (cut.empty()) cut.push_back(0);
      I(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) =
          base - prob_from_inputs(m, inputs_of(m, cut), y[j]);
    }
  }
  return I;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Spearman correlation as the Pearson correlation of average ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) ma += ra[i], mb += rb[i];
  ma /= n, mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return saa == sbb ? 1.0 : 0.0;
  return sab / std::sqrt(saa * sbb);
}

struct PairCounts {
  std::map<Factor, long long> nodes;
  std::map<std::pair<Factor, Factor>, long long> links;
};

// Double loop over every factor pair of every case.
inline PairCounts cooccurrence(const std::vector<std::vector<Factor>>& cases) {
  PairCounts out;
  for (const auto& c : cases) {
    std::set<std::pair<Factor, Factor>> seen;
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (std::size_t j = 0; j < c.size(); ++j) {
        if (c[i].aspect == c[j].aspect || !(c[i] < c[j])) continue;
        seen.insert({c[i], c[j]});
      }
    }
    for (const auto& p : seen) {
      ++out.links[p];
      ++out.nodes[p.first];
      ++out.nodes[p.second];
    }
  }
  return out;
}

// Fields of a normalized case whose phrase is not a substring of the
// narrative ("scope:field=phrase"); severity must sit in the outcome only.
inline std::vector<std::string> uncovered_fields(const NormalizedCase& c, const NarrativePair& n) {
  std::vector<std::string> missing;
  auto scan = [&](const std::string& scope, const NormalizedRecord& r) {
    for (const auto& [field, phrase] : r.fields) {
      if (n.descriptive.find(phrase) == std::string::npos) {
        missing.push_back(scope + ":" + field + "=" + phrase);
      }
    }
  };
  scan("case", c.scene);
  for (const auto& u : c.units) {
    scan("vehicle", u.vehicle);
    for (const auto& p : u.persons) scan("person", p);
  }
  for (const auto& [field, phrase] : c.outcome.fields) {
    if (n.outcome.find(phrase) == std::string::npos || n.descriptive.find(phrase) != std::string::npos) {
      missing.push_back("outcome:" + field + "=" + phrase);
    }
  }
  return missing;
}

// Whitespace tokens, stripped of surrounding punctuation, that are null markers.
inline std::vector<std::string> null_tokens(std::string_view text, const Lexicon& lex) {
  std::vector<std::string> found;
  std::string word;
  auto flush = [&] {
    std::size_t a = 0, b = word.size();
    while (a < b && std::ispunct(static_cast<unsigned char>(word[a]))) ++a;
    while (b > a && std::ispunct(static_cast<unsigned char>(word[b - 1]))) --b;
    const std::string core = word.substr(a, b - a);
    if (!core.empty() && lex.is_null_marker(core)) found.push_back(core);
    word.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) flush();
    else word.push_back(ch);
  }
  flush();
  return found;
}

}  // namespace oracle
