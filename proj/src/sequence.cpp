#include "spinbell/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spinbell {

using nlohmann::json;

namespace {
constexpr int kSequenceSchema = 1;
}

void PulseSequence::append(PulseSegment seg, double duration) {
  if (!(duration >= 0.0)) throw std::invalid_argument("pulse duration must be >= 0");
  seg.t_start = end_;
  seg.t_end = end_ + duration;
  end_ = seg.t_end;
  segments_.push_back(std::move(seg));
}

void PulseSequence::append_parallel(std::vector<std::pair<PulseSegment, double>> segs) {
  const int g = next_group();
  double longest = 0.0;
  for (auto& [seg, dur] : segs) {
    if (!(dur >= 0.0)) throw std::invalid_argument("pulse duration must be >= 0");
    seg.t_start = end_;
    seg.t_end = end_ + dur;
    seg.parallel_group = g;
    longest = std::max(longest, dur);
    segments_.push_back(seg);
  }
  end_ += longest;
}

void PulseSequence::place(PulseSegment seg) {
  if (!(seg.t_end >= seg.t_start) || seg.t_start < 0) throw std::invalid_argument("invalid pulse placement");
  end_ = std::max(end_, seg.t_end);
  segments_.push_back(std::move(seg));
}

void PulseSequence::delay(double ns) {
  if (!(ns >= 0.0)) throw std::invalid_argument("delay must be >= 0");
  end_ += ns;
}

void PulseSequence::overlay(const PulseSequence& other, double t0, int group) {
  for (PulseSegment s : other.segments()) {
    s.t_start += t0;
    s.t_end += t0;
    s.parallel_group = group;
    place(std::move(s));
  }
  end_ = std::max(end_, t0 + other.end_time());
}

int PulseSequence::next_group() const {
  int g = 0;
  for (const auto& s : segments_)
    if (s.parallel_group) g = std::max(g, *s.parallel_group + 1);
  return g;
}

void PulseSequence::validate() const {
  for (const auto& s : segments_) {
    if (!(s.t_end >= s.t_start) || s.t_start < 0) throw std::invalid_argument("pulse '" + s.label + "' has t_end < t_start");
    if (!(s.B1_G >= 0.0) || !std::isfinite(s.B1_G)) throw std::invalid_argument("pulse '" + s.label + "' has B1 < 0");
    if (!(s.omega >= 0.0) || !std::isfinite(s.omega) || !std::isfinite(s.phase))
      throw std::invalid_argument("pulse '" + s.label + "' has an invalid carrier");
  }
  for (std::size_t a = 0; a < segments_.size(); ++a)
    for (std::size_t b = a + 1; b < segments_.size(); ++b) {
      const auto &p = segments_[a], &q = segments_[b];
      const bool overlap = std::min(p.t_end, q.t_end) - std::max(p.t_start, q.t_start) > 1e-12;
      if (!overlap) continue;
      if (!p.parallel_group || !q.parallel_group || *p.parallel_group != *q.parallel_group)
        throw std::invalid_argument("pulses '" + p.label + "' and '" + q.label + "' overlap without a shared parallel group");
    }
}

json PulseSequence::to_json() const {
  json segs = json::array();
  for (const auto& s : segments_) {
    json j{{"B1_G", s.B1_G},           {"omega_rad_per_ns", s.omega}, {"phase_rad", s.phase},
           {"t_start_ns", s.t_start},  {"t_end_ns", s.t_end},         {"axis", s.axis},
           {"label", s.label}};
    j["parallel_group"] = s.parallel_group ? json(*s.parallel_group) : json(nullptr);
    segs.push_back(j);
  }
  return {{"schema", "spinbell.pulse_sequence"}, {"schema_version", kSequenceSchema}, {"end_time_ns", end_},
          {"segments", segs}};
}

PulseSequence PulseSequence::from_json(const json& j) {
  if (j.value("schema", "") != "spinbell.pulse_sequence") throw std::invalid_argument("not a pulse sequence document");
  if (j.value("schema_version", 0) != kSequenceSchema) throw std::invalid_argument("unsupported pulse sequence schema version");
  PulseSequence seq;
  for (const auto& s : j.at("segments")) {
    PulseSegment p;
    p.B1_G = s.at("B1_G").get<double>();
    p.omega = s.at("omega_rad_per_ns").get<double>();
    p.phase = s.at("phase_rad").get<double>();
    p.t_start = s.at("t_start_ns").get<double>();
    p.t_end = s.at("t_end_ns").get<double>();
    p.axis = s.value("axis", "y");
    p.label = s.value("label", "");
    if (s.contains("parallel_group") && !s.at("parallel_group").is_null()) p.parallel_group = s.at("parallel_group").get<int>();
    seq.place(p);
  }
  seq.end_ = std::max(seq.end_, j.value("end_time_ns", 0.0));
  seq.validate();
  return seq;
}

}  // namespace spinbell
