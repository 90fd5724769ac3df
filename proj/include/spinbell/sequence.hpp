#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace spinbell {

// Square drive B1 cos(omega t + phase) along `axis` for t in [t_start, t_end).
// omega = 0 gives a baseband (piecewise-constant) control of value B1 cos(phase).
struct PulseSegment {
  double B1_G = 0.0;
  double omega = 0.0;  // rad/ns
  double phase = 0.0;  // rad
  double t_start = 0.0, t_end = 0.0;  // ns
  std::string axis = "y";
  std::optional<int> parallel_group;
  std::string label;

  double duration() const { return t_end - t_start; }
};

class PulseSequence {
 public:
  const std::vector<PulseSegment>& segments() const { return segments_; }
  double end_time() const { return end_; }
  bool empty() const { return segments_.empty(); }

  // Back to back: starts at the current end of the sequence.
  void append(PulseSegment seg, double duration);
  // All segments start together at the current end, tagged with one group id.
  void append_parallel(std::vector<std::pair<PulseSegment, double>> segs);
  // Explicit placement; end time grows to cover it.
  void place(PulseSegment seg);
  void delay(double ns);
  // Overlay `other` starting at `t0`, all overlapping pulses share `group`.
  void overlay(const PulseSequence& other, double t0, int group);

  int next_group() const;
  void validate() const;

  nlohmann::json to_json() const;
  static PulseSequence from_json(const nlohmann::json& j);

 private:
  std::vector<PulseSegment> segments_;
  double end_ = 0.0;
};

}  // namespace spinbell
