#include <Eigen/Eigenvalues>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "mobinet/metrics.hpp"
#include "mobinet/random.hpp"

namespace mobinet {

namespace {

// x in {-1, +1}^(n+1), x_0 = +1, node i in S iff x_{i+1} = +1. Then
// cut(S) = x^T Q x.
Eigen::MatrixXd cut_quadratic_form(const Eigen::MatrixXd& d) {
  const Index n = d.rows();
  Eigen::MatrixXd off = d;
  off.diagonal().setZero();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n + 1, n + 1);
  q(0, 0) = 0.25 * off.sum();
  const Eigen::VectorXd lin = (off.rowwise().sum() - off.colwise().sum().transpose()) / 8.0;
  q.block(0, 1, 1, n) = lin.transpose();
  q.block(1, 0, n, 1) = lin;
  q.block(1, 1, n, n) = -(off + off.transpose()) / 8.0;
  return q;
}

std::vector<bool> subset_from_signs(const Eigen::VectorXd& x) {
  std::vector<bool> s(static_cast<std::size_t>(x.size() - 1));
  for (Index i = 1; i < x.size(); ++i) s[static_cast<std::size_t>(i - 1)] = (x(i) * x(0)) > 0;
  return s;
}

void normalize_rows(Eigen::MatrixXd& v) {
  for (Index i = 0; i < v.rows(); ++i) {
    const double nrm = v.row(i).norm();
    if (nrm > 0) {
      v.row(i) /= nrm;
    } else {
      v.row(i).setZero();
      v(i, 0) = 1.0;
    }
  }
}

// Greedy single-sign flips until no flip increases x^T c x.
void local_improve(const Eigen::MatrixXd& c, Eigen::VectorXd& x) {
  Eigen::VectorXd g = c * x;
  for (int pass = 0; pass < 1000; ++pass) {
    Index best = -1;
    double best_gain = 1e-12 * (1.0 + c.cwiseAbs().maxCoeff());
    for (Index k = 0; k < x.size(); ++k) {
      const double gain = -4.0 * x(k) * (g(k) - c(k, k) * x(k));
      if (gain > best_gain) {
        best_gain = gain;
        best = k;
      }
    }
    if (best < 0) return;
    g -= 2.0 * x(best) * c.col(best);
    x(best) = -x(best);
  }
}

struct SideResult {
  std::vector<bool> witness;
  double best_cut = 0.0;  // sign-adjusted: maximized value of sigma * cut
  double upper = 0.0;     // certified bound on max sigma * cut
  bool converged = false;
};

// Maximizes x^T c x over signs via the rank-p factorized relaxation.
SideResult solve_side(const Eigen::MatrixXd& c, const Eigen::MatrixXd& d, double sigma,
                      const SdpOptions& opt, Rng& rng) {
  const Index dim = c.rows();
  const Index p = opt.rank > 0 ? opt.rank
                               : static_cast<Index>(std::ceil(std::sqrt(2.0 * static_cast<double>(dim))));
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd v(dim, p);
  for (Index i = 0; i < dim; ++i)
    for (Index k = 0; k < p; ++k) v(i, k) = normal(rng);
  normalize_rows(v);

  SideResult out;
  Eigen::MatrixXd g = c * v;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd lam = (g.cwiseProduct(v)).rowwise().sum();
    const Eigen::MatrixXd riem = g - lam.asDiagonal() * v;
    if (riem.norm() <= opt.tolerance * std::max(1.0, g.norm())) {
      out.converged = true;
      break;
    }
    // Row-wise projected gradient step with exact line search: each row
    // moves to the unit vector along its off-diagonal gradient.
    for (Index i = 0; i < dim; ++i) {
      Eigen::RowVectorXd gi = g.row(i) - c(i, i) * v.row(i);
      const double nrm = gi.norm();
      if (nrm == 0.0) continue;
      const Eigen::RowVectorXd delta = gi / nrm - v.row(i);
      v.row(i) += delta;
      g.noalias() += c.col(i) * delta;
    }
  }
  g = c * v;

  // Dual certificate: y_i = (C V V^T)_ii; lift y until Diag(y) - C is PSD.
  Eigen::VectorXd y = (g.cwiseProduct(v)).rowwise().sum();
  Eigen::MatrixXd z = -c;
  z.diagonal() += y;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> zs(z, Eigen::EigenvaluesOnly);
  const double lift = std::max(0.0, -zs.eigenvalues().minCoeff());
  out.upper = y.sum() + static_cast<double>(dim) * lift;

  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd r(p);
  Eigen::VectorXd x(dim);
  for (int t = 0; t < std::max(1, opt.roundings); ++t) {
    for (Index k = 0; k < p; ++k) r(k) = normal(rng);
    const Eigen::VectorXd proj = v * r;
    for (Index i = 0; i < dim; ++i) x(i) = proj(i) >= 0 ? 1.0 : -1.0;
    local_improve(c, x);
    const std::vector<bool> s = subset_from_signs(x);
    const double val = sigma * cut_value(d, s);
    if (val > best) {
      best = val;
      out.witness = s;
    }
  }
  out.best_cut = best;
  out.upper = std::max(out.upper, best);
  return out;
}

CutDistanceResult exact_cut_distance(const Eigen::MatrixXd& d) {
  const Index n = d.rows();
  if (n > kMaxExactCutNodes)
    throw InvalidInput("cut_distance: exact mode supports at most " +
                       std::to_string(kMaxExactCutNodes) + " nodes");
  const Eigen::MatrixXd q = cut_quadratic_form(d);
  // Gray-code walk over all subsets, x starts at S = {}.
  Eigen::VectorXd x = -Eigen::VectorXd::Ones(n + 1);
  x(0) = 1.0;
  Eigen::VectorXd g = q * x;
  double val = x.dot(g);
  double best_abs = std::abs(val);
  std::uint64_t best_code = 0;
  std::uint64_t code = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const int bit = std::countr_zero(step);
    const Index k = bit + 1;
    val += -4.0 * x(k) * (g(k) - q(k, k) * x(k));
    g -= 2.0 * x(k) * q.col(k);
    x(k) = -x(k);
    code ^= std::uint64_t{1} << bit;
    if (std::abs(val) > best_abs) {
      best_abs = std::abs(val);
      best_code = code;
    }
  }
  CutDistanceResult res;
  res.witness.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) res.witness[static_cast<std::size_t>(i)] = (best_code >> i) & 1U;
  const double v = std::abs(cut_value(d, res.witness)) / static_cast<double>(n);
  res.lower = res.upper = v;
  return res;
}

}  // namespace

std::string CutDistanceResult::witness_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (std::size_t base = 0; base < witness.size(); base += 4) {
    unsigned nib = 0;
    for (std::size_t b = 0; b < 4 && base + b < witness.size(); ++b)
      if (witness[base + b]) nib |= 1U << b;
    out.push_back(digits[nib]);
  }
  std::reverse(out.begin(), out.end());
  return out.empty() ? "0" : out;
}

double cut_value(const Eigen::MatrixXd& d, const std::vector<bool>& in_s) {
  if (static_cast<Index>(in_s.size()) != d.rows() || d.rows() != d.cols())
    throw InvalidInput("cut_value: subset size does not match matrix");
  double total = 0.0;
  for (Index i = 0; i < d.rows(); ++i) {
    if (!in_s[static_cast<std::size_t>(i)]) continue;
    for (Index j = 0; j < d.cols(); ++j)
      if (!in_s[static_cast<std::size_t>(j)]) total += d(i, j);
  }
  return total;
}

CutDistanceResult cut_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, CutMode mode,
                               const SdpOptions& options) {
  detail::require_same_shape(a, b, "cut_distance");
  if (a.rows() != a.cols()) throw InvalidInput("cut_distance: matrices must be square");
  if (a.rows() == 0) throw InvalidInput("cut_distance: empty networks");
  const Eigen::MatrixXd d = a - b;
  if (mode == CutMode::kExact) return exact_cut_distance(d);

  const double n = static_cast<double>(d.rows());
  const Eigen::MatrixXd q = cut_quadratic_form(d);
  Rng rng = make_rng(options.seed, "cut-sdp");
  const SideResult pos = solve_side(q, d, 1.0, options, rng);
  const SideResult neg = solve_side(-q, d, -1.0, options, rng);

  CutDistanceResult res;
  res.converged = pos.converged && neg.converged;
  res.witness = pos.best_cut >= neg.best_cut ? pos.witness : neg.witness;
  res.lower = std::abs(cut_value(d, res.witness)) / n;
  res.upper = std::max({pos.upper, neg.upper, 0.0}) / n;
  res.upper = std::max(res.upper, res.lower);
  return res;
}

CutDistanceResult cut_distance(const MobilityNetwork& a, const MobilityNetwork& b, CutMode mode,
                               const SdpOptions& options) {
  return cut_distance(Eigen::MatrixXd(a.weights()), Eigen::MatrixXd(b.weights()), mode, options);
}

double cut_norm_exact(const Eigen::MatrixXd& d) {
  const Index n = d.rows();
  if (n > kMaxExactCutNodes) throw InvalidInput("cut_norm_exact: too many rows");
  double best = 0.0;
  const std::uint64_t total = std::uint64_t{1} << n;
  Eigen::RowVectorXd colsum = Eigen::RowVectorXd::Zero(d.cols());
  for (std::uint64_t step = 1; step < total; ++step) {
    const int bit = std::countr_zero(step);
    const std::uint64_t gray = step ^ (step >> 1);
    if ((gray >> bit) & 1U)
      colsum += d.row(bit);
    else
      colsum -= d.row(bit);
    const double pos = colsum.cwiseMax(0.0).sum();
    const double neg = -colsum.cwiseMin(0.0).sum();
    best = std::max({best, pos, neg});
  }
  return best;
}

}  // namespace mobinet
