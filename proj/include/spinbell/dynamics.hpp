#pragma once

#include "spinbell/model.hpp"
#include "spinbell/qspace.hpp"
#include "spinbell/sequence.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spinbell {

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// exp(-i H t) for Hermitian H
Mat expm_hermitian(const Mat& H, double t);
// general matrix exponential, Pade scaling and squaring
Mat expm(const Mat& A);

Mat propagate_unitary(const std::vector<std::pair<Mat, double>>& segments);

struct JumpOperator {
  std::string label;
  Mat op;       // Hermitian
  double rate;  // 1/ns, enters as rate (L rho L - 1/2 {L L, rho})
};

// L = sqrt(2) S_z per site with rate 1/T2, so a spin-1/2 coherence decays as exp(-t/T2).
// Sites with no T2 get no jump operator.
std::vector<JumpOperator> dephasing_jumps(const SpinSystem& system, const std::vector<std::optional<double>>& T2_ns);

// Everything lives in the drift eigenbasis (the "model basis"): H0 = diag(energies).
struct LindbladModel {
  RVec energies;
  std::vector<DriveOperator> drives;
  std::vector<JumpOperator> jumps;
  Mat basis;  // columns = model basis vectors in the original basis

  int dim() const { return static_cast<int>(energies.size()); }
  const DriveOperator& drive(const std::string& axis) const;
  void validate() const;

  static LindbladModel from_hamiltonian(const HamiltonianModel& model, const std::vector<JumpOperator>& jumps = {});
  static LindbladModel from_drift(const Mat& H0, const std::vector<DriveOperator>& drives,
                                  const std::vector<JumpOperator>& jumps);
};

// Column stacking: vec(A X B) = (B^T kron A) vec(X).
Mat superoperator(const Mat& H, const std::vector<JumpOperator>& jumps);

enum class PropagationMode { Lab, RotatingWave };
enum class Engine { Auto, Exact, Split };

// Where a carrier's phase is counted from. Absolute: cos(w t + phase), one phase-coherent source.
// PulseStart: every transition a pulse drives sees the phase at the pulse's own start, so detuning
// only acts while the pulse is on. Lab-frame mode is always Absolute.
enum class PhaseReference { Absolute, PulseStart };

struct PropagationConfig {
  PropagationMode mode = PropagationMode::RotatingWave;
  double substep_ns = 0.0;        // lab-frame carrier sampling; 0 = 1/(20 f_max)
  double split_step_ns = 0.1;     // dephasing splitting step for Split windows
  Engine engine = Engine::Auto;
  int exact_block_limit = 144;    // Auto uses Exact while every block superoperator is at most this size
  PhaseReference phase_reference = PhaseReference::PulseStart;
};

PropagationMode parse_mode(const std::string& s);
std::string to_string(PropagationMode m);
PhaseReference parse_phase_reference(const std::string& s);
std::string to_string(PhaseReference r);

// 1/(20 f_max), f_max from transition and carrier frequencies in cycles/ns
double lab_substep_limit(const LindbladModel& model, const PulseSequence& seq);

struct RotatingFrame {
  RVec frame;  // F_i = E_i - Lambda_i, rad/ns
  Mat H;       // time independent generator in the frame
  int dropped_edges = 0;
};

RotatingFrame rotating_frame_generator(const LindbladModel& model, const std::vector<const PulseSegment*>& active,
                                      PhaseReference ref = PhaseReference::Absolute);
RotatingFrame rotating_frame_segment(const LindbladModel& model, const PulseSegment& pulse);

// rho0 and the result are interaction-picture density matrices in the model basis;
// the clock starts at t = 0 for every call.
Mat lindblad_propagate(const LindbladModel& model, const QState& rho0, const PulseSequence& seq,
                       const PropagationConfig& cfg = {});

// Throws std::runtime_error when trace, Hermiticity or positivity drift beyond tolerance.
void check_propagated(const Mat& rho, double trace_tol = 1e-8, double pos_tol = 1e-7);

}  // namespace spinbell
