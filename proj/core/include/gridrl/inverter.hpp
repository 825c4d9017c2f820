#pragma once

#include <cstddef>

namespace gridrl {

// Piecewise-linear Volt-Var characteristic. Below v1 the inverter injects
// q_max * S, above v4 it absorbs q_max * S, and [v2, v3] is the deadband.
// q_max is a fraction of the inverter rating.
struct DroopCurve {
  double v1 = 0.92;
  double v2 = 0.98;
  double v3 = 1.02;
  double v4 = 1.08;
  double q_max = 1.0;

  // Throws ParameterError unless v1 < v2 <= v3 < v4 and 0 <= q_max <= 1.
  void validate() const;
};

// Smart inverter attached to one bus. Ratings are per-unit on the system base.
struct InverterSpec {
  std::size_t bus = 0;
  double s_rating = 0.0;
  double dc_rating = 0.0;
};

// Operating point of one inverter after the VAR-priority rule was applied.
struct InverterState {
  double p_avail = 0.0;
  double q_cmd = 0.0;
  double p_out = 0.0;
  double curtailed = 0.0;
  // Set when the requested Q exceeded the rating and had to be clamped.
  bool q_clamped = false;
};

// Honors the reactive command first and curtails real power so that
// p_out^2 + q_cmd^2 <= S^2.
InverterState apply_var_priority(const InverterSpec& spec, double p_avail,
                                 double q_cmd);

// Reactive output requested by the droop curve at local voltage v_local.
// p_avail does not enter the characteristic under VAR priority; it is part
// of the signature so alternative priority modes can use it.
double droop_q(const DroopCurve& curve, const InverterSpec& spec,
               double v_local, double p_avail);

}  // namespace gridrl
