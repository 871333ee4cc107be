#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spikesig/errors.hpp"

namespace spikesig {

// Regular-spiking parameter set of the two-variable Izhikevich model,
//
//     C dV/dt = k (V - V_rest)(V - V_th) - U + I
//       dU/dt = a [b (V - V_rest) - U]
//
// with reset V <- c, U <- U + d whenever V exceeds V_peak. Units are mV, ms
// and pA-like current units.
struct IzhikevichParams {
	double C = 100.0;
	double k = 0.7;
	double v_rest = -60.0;
	double v_th = -40.0;
	double v_peak = 35.0;
	double a = 0.03;
	double b = -2.0;
	double c = -50.0;
	double d = 100.0;
	double dt = 0.1; // ms
	double u0 = 0.0;

	void validate() const
	{
		if (!(v_rest < v_th && v_th < v_peak))
			throw config_error("neuron: require v_rest < v_th < v_peak");
		if (!(dt > 0.0))
			throw config_error("neuron: dt must be positive");
		if (!(C > 0.0))
			throw config_error("neuron: C must be positive");
	}
};

struct NeuronState {
	double v = -60.0;
	double u = 0.0;
	std::optional<double> last_spike_time;

	static NeuronState resting(const IzhikevichParams &p) { return {p.v_rest, p.u0, std::nullopt}; }
};

// Spike times in ms, strictly increasing, all in [0, duration).
struct SpikeTrain {
	std::vector<double> times;
	double duration = 0.0;

	std::size_t size() const { return times.size(); }
	bool empty() const { return times.empty(); }
	friend bool operator==(const SpikeTrain &, const SpikeTrain &) = default;
};

// Forward-Euler update without the reset. Both derivatives use the state at
// the start of the step.
inline void euler_update(NeuronState &s, const IzhikevichParams &p, double current)
{
	const double v = s.v, u = s.u;
	s.v = v + (p.dt / p.C) * (p.k * (v - p.v_rest) * (v - p.v_th) - u + current);
	s.u = u + p.dt * p.a * (p.b * (v - p.v_rest) - u);
}

inline bool reset_if_peak(NeuronState &s, const IzhikevichParams &p)
{
	if (s.v > p.v_peak) {
		s.v = p.c;
		s.u += p.d;
		return true;
	}
	return false;
}

// One step in place; returns true when the neuron spiked. V <= V_peak holds
// after every call.
inline bool advance(NeuronState &s, const IzhikevichParams &p, double current)
{
	euler_update(s, p, current);
	return reset_if_peak(s, p);
}

struct StepResult {
	NeuronState state;
	bool spiked = false;
};

inline StepResult step(NeuronState state, const IzhikevichParams &p, double current)
{
	if (!std::isfinite(state.v) || !std::isfinite(state.u) || !std::isfinite(current))
		throw numeric_error("izhikevich step: non-finite input");
	euler_update(state, p, current);
	// checked before the reset, which would otherwise hide an overflow in V
	if (!std::isfinite(state.v) || !std::isfinite(state.u))
		throw numeric_error("izhikevich step: state diverged");
	const bool spiked = reset_if_peak(state, p);
	return {state, spiked};
}

struct RunResult {
	SpikeTrain train;
	std::vector<double> v_trace; // V after each step
};

inline std::size_t steps_for(double duration_ms, double dt)
{
	const double n = duration_ms / dt;
	const double rounded = std::round(n);
	if (!(duration_ms > 0.0) || std::abs(n - rounded) > 1e-6)
		throw config_error("duration must be a positive multiple of dt");
	return static_cast<std::size_t>(rounded);
}

// Simulates from rest with one current value per dt step. The spike time of
// a step is the time at which that step begins.
inline RunResult run(const IzhikevichParams &p, std::span<const double> current)
{
	p.validate();
	RunResult r;
	r.train.duration = static_cast<double>(current.size()) * p.dt;
	r.v_trace.reserve(current.size());
	NeuronState s = NeuronState::resting(p);
	for (std::size_t i = 0; i < current.size(); ++i) {
		const auto res = step(s, p, current[i]);
		s = res.state;
		if (res.spiked) {
			const double t = static_cast<double>(i) * p.dt;
			r.train.times.push_back(t);
			s.last_spike_time = t;
		}
		r.v_trace.push_back(s.v);
	}
	return r;
}

inline RunResult run(const IzhikevichParams &p, double constant_current, double duration_ms)
{
	const std::vector<double> trace(steps_for(duration_ms, p.dt), constant_current);
	return run(p, trace);
}

inline void write_v_trace_csv(const RunResult &r, double dt, const std::filesystem::path &path)
{
	std::ofstream out(path);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	out << "t_ms,v_mv\n";
	char buf[64];
	for (std::size_t i = 0; i < r.v_trace.size(); ++i) {
		std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", static_cast<double>(i) * dt, r.v_trace[i]);
		out << buf;
	}
}

} // namespace spikesig
