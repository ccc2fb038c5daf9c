#pragma once

// Gaussian phase-space engine. Two interchangeable representations:
//
//  * ShotState      one sampled realization of every quadrature. Operations
//                   act on the sampled numbers (Heisenberg picture applied to
//                   c-numbers); noise-adding channels draw from an explicit Rng.
//  * GaussianState  mean vector and covariance matrix, propagated analytically.
//
// Quadratures are in shot-noise units with vacuum variance 1/4, ordered
// (x_1, p_1, ..., x_N, p_N). Both engines expose the same operation names so
// pipelines can be written once and cross-checked.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cvcqd/errors.hpp"
#include "cvcqd/rng.hpp"

namespace cvcqd {

inline constexpr double kVacuumVariance = 0.25;

struct Quad {
  double x = 0.0;
  double p = 0.0;

  friend bool operator==(const Quad&, const Quad&) = default;
  Quad operator+(const Quad& o) const { return {x + o.x, p + o.p}; }
  Quad operator-(const Quad& o) const { return {x - o.x, p - o.p}; }
};

enum class Quadrature { X, P };

enum class AmpMode {
  Ideal,        // X -> gX, P -> gP, no added noise
  PhaseInsensitive,  // additionally (g^2 - 1)/4 per quadrature
};

enum class BeamSplitterForm {
  Printed,   // both outputs use +sqrt(1-beta); not symplectic for 0 < beta < 1
  Physical,  // second output uses -sqrt(1-beta); orthogonal
};

struct BellOutcome {
  double x_mu = 0.0;  // (X_i - X_j)/sqrt(2)
  double p_mu = 0.0;  // (P_i + P_j)/sqrt(2)
};

const char* to_string(Quadrature q);
const char* to_string(AmpMode m);

// Standard symplectic form for n modes in (x, p) pair ordering.
Eigen::MatrixXd symplectic_form(std::size_t n_modes);

// Affine phase-space map r -> S r + d.
struct SymplecticOp {
  Eigen::MatrixXd s;
  Eigen::VectorXd d;

  std::size_t modes() const { return static_cast<std::size_t>(s.rows() / 2); }
  // max |S Omega S^T - Omega|; zero for a genuine symplectic map.
  double defect() const;
  bool is_symplectic(double tol = 1e-12) const { return defect() <= tol; }
};

SymplecticOp identity_op(std::size_t n_modes);
SymplecticOp displacement_op(std::size_t n_modes, std::size_t mode, Quad alpha);
SymplecticOp two_mode_squeeze_op(std::size_t n_modes, std::size_t i, std::size_t j, double r);
SymplecticOp beam_splitter_op(std::size_t n_modes, std::size_t i, std::size_t j, double beta,
                              BeamSplitterForm form);
// Loss as a physical beam splitter coupling `mode` to an environment mode.
SymplecticOp loss_dilation_op(std::size_t n_modes, std::size_t mode, std::size_t env_mode,
                              double eta);

class ShotState {
 public:
  ShotState() = default;
  ShotState(std::vector<Quad> quads, std::uint64_t seed_tag);

  // Independent vacuum samples for every mode.
  static ShotState vacuum(std::size_t n_modes, Rng& rng);

  std::size_t modes() const { return quads_.size(); }
  const Quad& quad(std::size_t mode) const;
  bool consumed(std::size_t mode) const;
  std::uint64_t seed_tag() const { return seed_tag_; }
  const std::vector<Quad>& quads() const { return quads_; }

  std::size_t add_mode(Quad q);
  std::size_t add_vacuum_mode(Rng& rng);
  void swap_modes(std::size_t i, std::size_t j);

  void displace(std::size_t mode, Quad alpha);
  void two_mode_squeeze(std::size_t i, std::size_t j, double r);
  void beam_split(std::size_t i, std::size_t j, double beta,
                  BeamSplitterForm form = BeamSplitterForm::Physical);
  void loss_channel(std::size_t mode, double eta, double epsilon, Rng& rng);
  void amplify(std::size_t mode, double g, AmpMode noise, Rng& rng);
  void add_noise(std::size_t mode, double variance, Rng& rng);

  // Destructive readouts.
  double homodyne(std::size_t mode, Quadrature q);
  BellOutcome bell_measure(std::size_t i, std::size_t j);
  // Bell combination of the current realization without consuming anything.
  BellOutcome bell_combination(std::size_t i, std::size_t j) const;

 private:
  void check_live(std::size_t mode) const;

  std::vector<Quad> quads_;
  std::vector<bool> consumed_;
  std::uint64_t seed_tag_ = 0;
};

class GaussianState {
 public:
  GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  std::size_t modes() const { return static_cast<std::size_t>(mean_.size() / 2); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  bool consumed(std::size_t mode) const;

  std::size_t add_vacuum_mode();
  // Appends a classical copy of `mode` (fully correlated). Used to hold a
  // reference value computed from the same realization that continues on.
  std::size_t duplicate_mode(std::size_t mode);

  void apply(const SymplecticOp& op);
  // r -> S r + d, V -> S V S^T + noise.
  void apply_linear(const Eigen::MatrixXd& s, const Eigen::VectorXd& d,
                    const Eigen::MatrixXd& noise);

  void displace(std::size_t mode, Quad alpha);
  void two_mode_squeeze(std::size_t i, std::size_t j, double r);
  void beam_split(std::size_t i, std::size_t j, double beta,
                  BeamSplitterForm form = BeamSplitterForm::Physical);
  void loss_channel(std::size_t mode, double eta, double epsilon);
  void amplify(std::size_t mode, double g, AmpMode noise);
  void add_noise(std::size_t mode, double variance);

  // Draws from the marginal and conditions the rest of the state on it.
  double homodyne(std::size_t mode, Quadrature q, Rng& rng);
  BellOutcome bell_measure(std::size_t i, std::size_t j, Rng& rng);
  // Gaussian conditioning on rows * r = outcome.
  void condition(const Eigen::MatrixXd& rows, const Eigen::VectorXd& outcome);

  double mean_of(const Eigen::VectorXd& w) const { return w.dot(mean_); }
  double variance_of(const Eigen::VectorXd& w) const { return w.dot(cov_ * w); }

  Eigen::VectorXd symplectic_eigenvalues() const;
  // cov symmetric and every symplectic eigenvalue >= 1/4 - tol.
  bool is_physical(double tol = 1e-9) const;
  void validate(double tol = 1e-9) const;  // throws InvalidState

 private:
  void check_live(std::size_t mode) const;
  std::size_t index_x(std::size_t mode) const { return 2 * mode; }

  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  std::vector<bool> consumed_;
};

GaussianState make_vacuum(std::size_t n_modes);

// Draws ShotStates from a fixed GaussianState. The covariance factor is
// computed once; each draw is a function of the seed only.
class GaussianSampler {
 public:
  explicit GaussianSampler(const GaussianState& state);
  ShotState draw(std::uint64_t seed) const;
  ShotState draw(Rng& rng) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;
  std::vector<bool> consumed_;
};

ShotState sample_shot(const GaussianState& state, std::uint64_t seed);

}  // namespace cvcqd
