#include "cvcqd/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cvcqd {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

void require_mode(std::size_t mode, std::size_t n) {
  if (mode >= n) {
    throw std::invalid_argument("mode " + std::to_string(mode) + " out of range for " +
                                std::to_string(n) + " modes");
  }
}

void require_pair(std::size_t i, std::size_t j, std::size_t n) {
  require_mode(i, n);
  require_mode(j, n);
  if (i == j) throw std::invalid_argument("two-mode operation needs distinct modes");
}

void require_squeeze(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument("squeezing parameter must be finite and >= 0");
  }
}

void require_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("beam splitter transmission must lie in [0, 1]");
  }
}

void require_loss(double eta, double epsilon) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("transmittance eta must lie in (0, 1]");
  }
  if (!(epsilon >= 0.0)) throw std::invalid_argument("excess noise must be >= 0");
}

void require_gain(double g) {
  if (!(g >= 1.0) || !std::isfinite(g)) throw std::invalid_argument("gain must be >= 1");
}

}  // namespace

const char* to_string(Quadrature q) { return q == Quadrature::X ? "X" : "P"; }

const char* to_string(AmpMode m) {
  return m == AmpMode::Ideal ? "ideal" : "phase-insensitive";
}

// ---------------------------------------------------------------------------
// Symplectic maps

Eigen::MatrixXd symplectic_form(std::size_t n_modes) {
  const auto dim = static_cast<Eigen::Index>(2 * n_modes);
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index k = 0; k < dim; k += 2) {
    omega(k, k + 1) = 1.0;
    omega(k + 1, k) = -1.0;
  }
  return omega;
}

double SymplecticOp::defect() const {
  const Eigen::MatrixXd omega = symplectic_form(modes());
  return (s * omega * s.transpose() - omega).cwiseAbs().maxCoeff();
}

SymplecticOp identity_op(std::size_t n_modes) {
  const auto dim = static_cast<Eigen::Index>(2 * n_modes);
  return {Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)};
}

SymplecticOp displacement_op(std::size_t n_modes, std::size_t mode, Quad alpha) {
  require_mode(mode, n_modes);
  SymplecticOp op = identity_op(n_modes);
  op.d(2 * mode) = alpha.x;
  op.d(2 * mode + 1) = alpha.p;
  return op;
}

SymplecticOp two_mode_squeeze_op(std::size_t n_modes, std::size_t i, std::size_t j, double r) {
  require_pair(i, j, n_modes);
  require_squeeze(r);
  SymplecticOp op = identity_op(n_modes);
  const double c = std::cosh(r);
  const double s = std::sinh(r);
  const auto xi = static_cast<Eigen::Index>(2 * i), pi = xi + 1;
  const auto xj = static_cast<Eigen::Index>(2 * j), pj = xj + 1;
  op.s(xi, xi) = c;
  op.s(xi, xj) = s;
  op.s(xj, xj) = c;
  op.s(xj, xi) = s;
  op.s(pi, pi) = c;
  op.s(pi, pj) = -s;
  op.s(pj, pj) = c;
  op.s(pj, pi) = -s;
  return op;
}

SymplecticOp beam_splitter_op(std::size_t n_modes, std::size_t i, std::size_t j, double beta,
                              BeamSplitterForm form) {
  require_pair(i, j, n_modes);
  require_beta(beta);
  SymplecticOp op = identity_op(n_modes);
  const double t = std::sqrt(beta);
  const double u = std::sqrt(1.0 - beta);
  const double back = form == BeamSplitterForm::Printed ? u : -u;
  for (Eigen::Index q = 0; q < 2; ++q) {
    const auto a = static_cast<Eigen::Index>(2 * i) + q;
    const auto b = static_cast<Eigen::Index>(2 * j) + q;
    op.s(a, a) = t;
    op.s(a, b) = u;
    op.s(b, b) = t;
    op.s(b, a) = back;
  }
  return op;
}

SymplecticOp loss_dilation_op(std::size_t n_modes, std::size_t mode, std::size_t env_mode,
                              double eta) {
  require_loss(eta, 0.0);
  return beam_splitter_op(n_modes, mode, env_mode, eta, BeamSplitterForm::Physical);
}

// ---------------------------------------------------------------------------
// Shot engine

ShotState::ShotState(std::vector<Quad> quads, std::uint64_t seed_tag)
    : quads_(std::move(quads)), consumed_(quads_.size(), false), seed_tag_(seed_tag) {}

ShotState ShotState::vacuum(std::size_t n_modes, Rng& rng) {
  if (n_modes == 0) throw std::invalid_argument("need at least one mode");
  std::vector<Quad> quads(n_modes);
  for (auto& q : quads) {
    q.x = rng.normal(kVacuumVariance);
    q.p = rng.normal(kVacuumVariance);
  }
  return ShotState(std::move(quads), rng.seed());
}

const Quad& ShotState::quad(std::size_t mode) const {
  require_mode(mode, modes());
  return quads_[mode];
}

bool ShotState::consumed(std::size_t mode) const {
  require_mode(mode, modes());
  return consumed_[mode];
}

void ShotState::check_live(std::size_t mode) const {
  require_mode(mode, modes());
  if (consumed_[mode]) {
    throw InvalidState("mode " + std::to_string(mode) + " has already been measured");
  }
}

std::size_t ShotState::add_mode(Quad q) {
  quads_.push_back(q);
  consumed_.push_back(false);
  return quads_.size() - 1;
}

std::size_t ShotState::add_vacuum_mode(Rng& rng) {
  const double x = rng.normal(kVacuumVariance);
  const double p = rng.normal(kVacuumVariance);
  return add_mode({x, p});
}

void ShotState::swap_modes(std::size_t i, std::size_t j) {
  require_pair(i, j, modes());
  std::swap(quads_[i], quads_[j]);
  const bool ci = consumed_[i];
  consumed_[i] = consumed_[j];
  consumed_[j] = ci;
}

void ShotState::displace(std::size_t mode, Quad alpha) {
  check_live(mode);
  quads_[mode].x += alpha.x;
  quads_[mode].p += alpha.p;
}

void ShotState::two_mode_squeeze(std::size_t i, std::size_t j, double r) {
  require_pair(i, j, modes());
  require_squeeze(r);
  check_live(i);
  check_live(j);
  if (r == 0.0) return;
  const double c = std::cosh(r);
  const double s = std::sinh(r);
  const Quad a = quads_[i];
  const Quad b = quads_[j];
  quads_[i] = {c * a.x + s * b.x, c * a.p - s * b.p};
  quads_[j] = {c * b.x + s * a.x, c * b.p - s * a.p};
}

void ShotState::beam_split(std::size_t i, std::size_t j, double beta, BeamSplitterForm form) {
  require_pair(i, j, modes());
  require_beta(beta);
  check_live(i);
  check_live(j);
  if (beta == 1.0) return;
  const double t = std::sqrt(beta);
  const double u = std::sqrt(1.0 - beta);
  const double back = form == BeamSplitterForm::Printed ? u : -u;
  const Quad a = quads_[i];
  const Quad b = quads_[j];
  quads_[i] = {t * a.x + u * b.x, t * a.p + u * b.p};
  quads_[j] = {t * b.x + back * a.x, t * b.p + back * a.p};
}

void ShotState::loss_channel(std::size_t mode, double eta, double epsilon, Rng& rng) {
  require_loss(eta, epsilon);
  check_live(mode);
  if (eta == 1.0) return;
  const double env_var = kVacuumVariance + epsilon;
  const double t = std::sqrt(eta);
  const double u = std::sqrt(1.0 - eta);
  Quad& q = quads_[mode];
  q.x = t * q.x + u * rng.normal(env_var);
  q.p = t * q.p + u * rng.normal(env_var);
}

void ShotState::amplify(std::size_t mode, double g, AmpMode noise, Rng& rng) {
  require_gain(g);
  check_live(mode);
  if (g == 1.0) return;
  Quad& q = quads_[mode];
  q.x *= g;
  q.p *= g;
  if (noise == AmpMode::PhaseInsensitive) {
    const double added = (g * g - 1.0) * kVacuumVariance;
    q.x += rng.normal(added);
    q.p += rng.normal(added);
  }
}

void ShotState::add_noise(std::size_t mode, double variance, Rng& rng) {
  if (!(variance >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");
  check_live(mode);
  if (variance == 0.0) return;
  quads_[mode].x += rng.normal(variance);
  quads_[mode].p += rng.normal(variance);
}

double ShotState::homodyne(std::size_t mode, Quadrature q) {
  check_live(mode);
  consumed_[mode] = true;
  return q == Quadrature::X ? quads_[mode].x : quads_[mode].p;
}

BellOutcome ShotState::bell_combination(std::size_t i, std::size_t j) const {
  require_pair(i, j, modes());
  check_live(i);
  check_live(j);
  return {(quads_[i].x - quads_[j].x) * kInvSqrt2, (quads_[i].p + quads_[j].p) * kInvSqrt2};
}

BellOutcome ShotState::bell_measure(std::size_t i, std::size_t j) {
  const BellOutcome out = bell_combination(i, j);
  consumed_[i] = true;
  consumed_[j] = true;
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble engine

GaussianState::GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (mean_.size() == 0 || mean_.size() % 2 != 0) {
    throw std::invalid_argument("mean vector must have even, non-zero length");
  }
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw std::invalid_argument("covariance shape does not match mean");
  }
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("covariance must be symmetric");
  }
  consumed_.assign(modes(), false);
}

GaussianState make_vacuum(std::size_t n_modes) {
  if (n_modes == 0) throw std::invalid_argument("need at least one mode");
  const auto dim = static_cast<Eigen::Index>(2 * n_modes);
  return GaussianState(Eigen::VectorXd::Zero(dim),
                       kVacuumVariance * Eigen::MatrixXd::Identity(dim, dim));
}

bool GaussianState::consumed(std::size_t mode) const {
  require_mode(mode, modes());
  return consumed_[mode];
}

void GaussianState::check_live(std::size_t mode) const {
  require_mode(mode, modes());
  if (consumed_[mode]) {
    throw InvalidState("mode " + std::to_string(mode) + " has already been measured");
  }
}

std::size_t GaussianState::add_vacuum_mode() {
  const Eigen::Index old = mean_.size();
  mean_.conservativeResize(old + 2);
  mean_.tail(2).setZero();
  Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(old + 2, old + 2);
  grown.topLeftCorner(old, old) = cov_;
  grown(old, old) = kVacuumVariance;
  grown(old + 1, old + 1) = kVacuumVariance;
  cov_ = std::move(grown);
  consumed_.push_back(false);
  return modes() - 1;
}

std::size_t GaussianState::duplicate_mode(std::size_t mode) {
  require_mode(mode, modes());
  const Eigen::Index old = mean_.size();
  const auto src = static_cast<Eigen::Index>(2 * mode);
  mean_.conservativeResize(old + 2);
  mean_.segment(old, 2) = mean_.segment(src, 2);
  Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(old + 2, old + 2);
  grown.topLeftCorner(old, old) = cov_;
  grown.block(old, 0, 2, old) = cov_.block(src, 0, 2, old);
  grown.block(0, old, old, 2) = cov_.block(0, src, old, 2);
  grown.block(old, old, 2, 2) = cov_.block(src, src, 2, 2);
  cov_ = std::move(grown);
  consumed_.push_back(false);
  return modes() - 1;
}

void GaussianState::apply(const SymplecticOp& op) {
  if (op.s.rows() != mean_.size()) throw std::invalid_argument("operator dimension mismatch");
  mean_ = op.s * mean_ + op.d;
  cov_ = op.s * cov_ * op.s.transpose();
}

void GaussianState::apply_linear(const Eigen::MatrixXd& s, const Eigen::VectorXd& d,
                                 const Eigen::MatrixXd& noise) {
  if (s.rows() != mean_.size() || s.cols() != mean_.size() || d.size() != mean_.size() ||
      noise.rows() != mean_.size() || noise.cols() != mean_.size()) {
    throw std::invalid_argument("linear map dimension mismatch");
  }
  mean_ = s * mean_ + d;
  cov_ = s * cov_ * s.transpose() + noise;
}

void GaussianState::displace(std::size_t mode, Quad alpha) {
  check_live(mode);
  mean_(2 * mode) += alpha.x;
  mean_(2 * mode + 1) += alpha.p;
}

void GaussianState::two_mode_squeeze(std::size_t i, std::size_t j, double r) {
  require_pair(i, j, modes());
  check_live(i);
  check_live(j);
  apply(two_mode_squeeze_op(modes(), i, j, r));
}

void GaussianState::beam_split(std::size_t i, std::size_t j, double beta, BeamSplitterForm form) {
  require_pair(i, j, modes());
  check_live(i);
  check_live(j);
  apply(beam_splitter_op(modes(), i, j, beta, form));
}

void GaussianState::loss_channel(std::size_t mode, double eta, double epsilon) {
  require_loss(eta, epsilon);
  check_live(mode);
  const double t = std::sqrt(eta);
  const auto k = static_cast<Eigen::Index>(2 * mode);
  mean_.segment(k, 2) *= t;
  cov_.middleRows(k, 2) *= t;
  cov_.middleCols(k, 2) *= t;
  const double added = (1.0 - eta) * (kVacuumVariance + epsilon);
  cov_(k, k) += added;
  cov_(k + 1, k + 1) += added;
}

void GaussianState::amplify(std::size_t mode, double g, AmpMode noise) {
  require_gain(g);
  check_live(mode);
  const auto k = static_cast<Eigen::Index>(2 * mode);
  mean_.segment(k, 2) *= g;
  cov_.middleRows(k, 2) *= g;
  cov_.middleCols(k, 2) *= g;
  if (noise == AmpMode::PhaseInsensitive) {
    const double added = (g * g - 1.0) * kVacuumVariance;
    cov_(k, k) += added;
    cov_(k + 1, k + 1) += added;
  }
}

void GaussianState::add_noise(std::size_t mode, double variance) {
  if (!(variance >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");
  check_live(mode);
  const auto k = static_cast<Eigen::Index>(2 * mode);
  cov_(k, k) += variance;
  cov_(k + 1, k + 1) += variance;
}

void GaussianState::condition(const Eigen::MatrixXd& rows, const Eigen::VectorXd& outcome) {
  if (rows.cols() != mean_.size() || rows.rows() != outcome.size()) {
    throw std::invalid_argument("conditioning dimension mismatch");
  }
  const Eigen::MatrixXd vm = cov_ * rows.transpose();
  const Eigen::MatrixXd s = rows * vm;
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> solver(s);
  const Eigen::MatrixXd gain = solver.solve(vm.transpose()).transpose();
  mean_ += gain * (outcome - rows * mean_);
  cov_ -= gain * vm.transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose());
}

double GaussianState::homodyne(std::size_t mode, Quadrature q, Rng& rng) {
  check_live(mode);
  const auto k = static_cast<Eigen::Index>(2 * mode + (q == Quadrature::X ? 0 : 1));
  const double var = std::max(cov_(k, k), 0.0);
  const double outcome = mean_(k) + std::sqrt(var) * rng.normal();
  Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, mean_.size());
  row(0, k) = 1.0;
  condition(row, Eigen::VectorXd::Constant(1, outcome));
  consumed_[mode] = true;
  return outcome;
}

BellOutcome GaussianState::bell_measure(std::size_t i, std::size_t j, Rng& rng) {
  require_pair(i, j, modes());
  check_live(i);
  check_live(j);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(2, mean_.size());
  rows(0, 2 * i) = kInvSqrt2;
  rows(0, 2 * j) = -kInvSqrt2;
  rows(1, 2 * i + 1) = kInvSqrt2;
  rows(1, 2 * j + 1) = kInvSqrt2;
  const Eigen::Vector2d mu = rows * mean_;
  const Eigen::Matrix2d s = rows * cov_ * rows.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(s);
  Eigen::Vector2d z(rng.normal(), rng.normal());
  const Eigen::Vector2d y =
      mu + eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z;
  condition(rows, y);
  consumed_[i] = true;
  consumed_[j] = true;
  return {y(0), y(1)};
}

Eigen::VectorXd GaussianState::symplectic_eigenvalues() const {
  std::vector<Eigen::Index> live;
  for (std::size_t m = 0; m < modes(); ++m) {
    if (!consumed_[m]) {
      live.push_back(static_cast<Eigen::Index>(2 * m));
      live.push_back(static_cast<Eigen::Index>(2 * m + 1));
    }
  }
  const auto dim = static_cast<Eigen::Index>(live.size());
  if (dim == 0) return Eigen::VectorXd();
  Eigen::MatrixXd sub(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = 0; b < dim; ++b) sub(a, b) = cov_(live[a], live[b]);
  }
  const Eigen::MatrixXd omega = symplectic_form(static_cast<std::size_t>(dim / 2));
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(omega * sub, false);
  std::vector<double> nus;
  for (Eigen::Index k = 0; k < dim; ++k) nus.push_back(std::abs(eig.eigenvalues()(k).imag()));
  std::sort(nus.begin(), nus.end());
  // Eigenvalues of Omega V come in +-i nu pairs.
  Eigen::VectorXd out(dim / 2);
  for (Eigen::Index k = 0; k < dim / 2; ++k) out(k) = 0.5 * (nus[2 * k] + nus[2 * k + 1]);
  return out;
}

bool GaussianState::is_physical(double tol) const {
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  const Eigen::VectorXd nu = symplectic_eigenvalues();
  return nu.size() == 0 || nu.minCoeff() >= kVacuumVariance - tol;
}

void GaussianState::validate(double tol) const {
  if (!is_physical(tol)) {
    throw InvalidState("covariance violates the uncertainty relation");
  }
}

// ---------------------------------------------------------------------------
// Sampling

GaussianSampler::GaussianSampler(const GaussianState& state) : mean_(state.mean()) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state.cov());
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -1e-12 * scale) {
    throw InvalidState("covariance is not positive semidefinite");
  }
  factor_ = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  consumed_.resize(state.modes());
  for (std::size_t m = 0; m < state.modes(); ++m) consumed_[m] = state.consumed(m);
}

ShotState GaussianSampler::draw(Rng& rng) const {
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  const Eigen::VectorXd v = mean_ + factor_ * z;
  std::vector<Quad> quads(static_cast<std::size_t>(v.size() / 2));
  for (std::size_t m = 0; m < quads.size(); ++m) quads[m] = {v(2 * m), v(2 * m + 1)};
  ShotState shot(std::move(quads), rng.seed());
  for (std::size_t m = 0; m < consumed_.size(); ++m) {
    if (consumed_[m]) shot.homodyne(m, Quadrature::X);
  }
  return shot;
}

ShotState GaussianSampler::draw(std::uint64_t seed) const {
  Rng rng(seed);
  return draw(rng);
}

ShotState sample_shot(const GaussianState& state, std::uint64_t seed) {
  return GaussianSampler(state).draw(seed);
}

}  // namespace cvcqd
