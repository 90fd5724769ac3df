#pragma once

#include "spinbell/model.hpp"
#include "spinbell/qspace.hpp"
#include "spinbell/sequence.hpp"

#include <array>
#include <string>
#include <vector>

namespace spinbell {

// U_{x,y}(theta, phi) = cos(theta/2)(|x><x| + |y><y|) + sin(theta/2)(|y><x| e^{i phi} - |x><y| e^{-i phi}).
// In the preparation tables x is the final and y the initial level.
struct PlanarRotation {
  int x = 0, y = 1;
  double theta = 0.0, phi = 0.0;
};

// P_{x,y}(alpha) = |x><x| e^{i alpha} + |y><y| e^{-i alpha} + rest
struct PhaseGate {
  int x = 0, y = 1;
  double alpha = 0.0;
};

// Controlled-Z on the joint qudit component (mu, nu), mediated by the ancilla.
// mu, nu are level indices 0..3 (= m +3/2 .. -3/2) of the first and second qudit.
struct ControlledZSpec {
  int mu = 0, nu = 0;
};

Mat planar_rotation_matrix(int dim, const PlanarRotation& r);
Mat phase_gate_matrix(int dim, const PhaseGate& p);

// A drivable two-level line in the labeled eigenbasis. element = <lower|M|upper>.
struct ResonantLine {
  int lower = 0, upper = 1;
  double omega = 0.0;  // rad/ns
  cplx element;        // rad/ns per tesla
};

ResonantLine resonant_line(const HamiltonianModel& model, int a, int b, const std::string& axis = "y");
// Mean frequency and matrix element over several equivalent lines (one per spectator context).
ResonantLine average_lines(const std::vector<ResonantLine>& lines);

// Square resonant pulse realizing U_{x,y}(theta, phi) on `line`, with x the final level.
// Duration |theta| / (B1 |element|); the segment starts at t = 0.
PulseSegment compile_line(const ResonantLine& line, bool x_is_upper, double theta, double phi, double B1_G,
                          const std::string& axis = "y", const std::string& label = "");
PulseSegment compile_rotation(const HamiltonianModel& model, const PlanarRotation& rot, double B1_G,
                              const std::string& axis = "y");

// A gate-level protocol together with its pulse realization.
struct Protocol {
  std::vector<std::string> steps;
  Mat exact_unitary;   // product of ideal gates, labeled basis
  PulseSequence sequence;
  Vec initial;         // labeled basis
  Vec target;
};

// Dimer labels: qubit up block 0..5, down block 6..11, nucleus m = 5/2 .. -5/2 inside each block.
int dimer_label(bool electron_up, double m_nuc);

// Five-pulse preparation of (|up,3/2> + |up,-1/2> + |down,-1/2> + |down,-3/2>)/2 from |down,-5/2>.
// B1_G holds one amplitude for all pulses or one per pulse.
Protocol prep_chsh_state(const HamiltonianModel& dimer, const std::vector<double>& B1_G);

int trimer_label(const HamiltonianModel& trimer, double m1, double m_anc, double m3);

// Fifteen-pulse preparation of sum_m |m, -1/2, m>/2. Group 1 drives the pi/2 rotations
// of the second qudit, group 2 everything else.
Protocol prep_cglmp_state(const HamiltonianModel& trimer, double B1_group1_G, double B1_group2_G);

// Qudit pulse compiled on the line averaged over all levels of the other qudit, ancilla at -1/2.
// site is 0 or 2, levels are 0..3.
PulseSegment compile_qudit_rotation(const HamiltonianModel& trimer, int site, const PlanarRotation& r, double B1_G,
                                    const std::string& label = "");
// Full-space ideal unitary of a 4-level gate on one qudit site.
Mat embed_qudit_gate(const HamiltonianModel& trimer, int site, const Mat& g4);
// Ideal W gate: phase -1 on |mu, -1/2, nu> (ancilla 2 pi rotation) and its pulse.
Mat controlled_z_matrix(const HamiltonianModel& trimer, const ControlledZSpec& cz);
PulseSegment compile_controlled_z(const HamiltonianModel& trimer, const ControlledZSpec& cz, double B1_G);

// SU(4) decomposition: W U34 U24 U14 U23 U13 U12 = e^{i lambda} P12 P23 P34.
struct SU4Decomposition {
  // logical rotations in elimination order (3,4), (2,4), (1,4), (2,3), (1,3), (1,2); levels 0-based
  std::array<PlanarRotation, 6> rotations;
  std::array<double, 3> alpha{};  // P12, P23, P34
  double lambda = 0.0;            // defined modulo pi/2
};

SU4Decomposition decompose_su4(const Mat& W);
// e^{i lambda} P12 P23 P34 U12^-1 U13^-1 U23^-1 U14^-1 U24^-1 U34^-1
Mat recompose_su4(const SU4Decomposition& dec);

// Adjacent-level pulse program. Steps in one block run in parallel lanes; blocks are sequential.
struct PhysicalStep {
  PlanarRotation rot;  // on adjacent levels
  std::string label;
};
struct PhysicalBlock {
  std::vector<std::vector<PhysicalStep>> lanes;
};
enum class PhaseParallel { P12WithP34, P34WithU12 };

std::vector<PhysicalBlock> physical_program(const SU4Decomposition& dec, PhaseParallel mode);
// Time-ordered product of every step (lanes commute by construction).
Mat program_unitary(const std::vector<PhysicalBlock>& program);

// Measurement sequences for U_i^(A) (x) U_j^(B), ordered (A1B1, A1B2, A2B1, A2B2).
struct MeasurementProtocol {
  std::string name;
  Mat exact_unitary;  // full labeled space
  PulseSequence sequence;
};
std::vector<MeasurementProtocol> cglmp_measurement_sequences(const HamiltonianModel& trimer, double B1_G);

}  // namespace spinbell
