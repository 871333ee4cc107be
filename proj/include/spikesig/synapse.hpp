#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "spikesig/errors.hpp"

namespace spikesig {

// Conductance of one alpha synapse `t` ms after a spike: K t exp(-t/tau).
// The kernel peaks at t = tau with value K tau / e.
inline double alpha_kernel(double t, double k_syn, double tau)
{
	return k_syn * t * std::exp(-t / tau);
}

// Linear superposition over synapses and received spikes. arrivals[k] holds
// the spike arrival times of synapse k; all must be <= t.
inline double total_conductance(std::span<const std::vector<double>> arrivals, std::span<const double> k_syn,
                                double tau, double t)
{
	if (arrivals.size() != k_syn.size())
		throw input_error("total_conductance: arrival lists and amplitudes differ in length");
	double g = 0.0;
	for (std::size_t k = 0; k < arrivals.size(); ++k) {
		double s = 0.0;
		for (double tf : arrivals[k])
			s += (t - tf) * std::exp(-(t - tf) / tau);
		g += k_syn[k] * s;
	}
	return g;
}

// I_syn = sum_k E_k G_k - V sum_k G_k
inline double synaptic_current(std::span<const double> g, std::span<const double> e_rev, double v)
{
	if (g.size() != e_rev.size())
		throw input_error("synaptic_current: conductance and reversal lists differ in length");
	double eg = 0.0, gsum = 0.0;
	for (std::size_t k = 0; k < g.size(); ++k) {
		eg += e_rev[k] * g[k];
		gsum += g[k];
	}
	return eg - v * gsum;
}

// All reversal potentials at 0 mV.
inline double synaptic_current(double g_total, double v) { return -v * g_total; }

// Default pruning horizon in units of tau. At 30 tau the kernel is below
// 1e-11 of its peak; at 10 tau it is still ~1e-3 of the peak.
inline constexpr double default_prune_horizon_taus = 30.0;

// A single synapse with an explicit arrival list. Arrivals older than
// `horizon_taus * tau` are dropped on prune().
struct SynapseState {
	double k_syn = 1.0;
	double tau = 2.0;
	std::deque<double> arrivals; // sorted

	void receive(double t)
	{
		if (!arrivals.empty() && t < arrivals.back())
			throw input_error("synapse: arrivals must be non-decreasing");
		arrivals.push_back(t);
	}

	void prune(double now, double horizon_taus = default_prune_horizon_taus)
	{
		const double cutoff = now - horizon_taus * tau;
		while (!arrivals.empty() && arrivals.front() < cutoff)
			arrivals.pop_front();
	}

	double conductance(double now) const
	{
		double s = 0.0;
		for (double tf : arrivals)
			if (tf <= now)
				s += (now - tf) * std::exp(-(now - tf) / tau);
		return k_syn * s;
	}
};

// Exact recursive form of sum_j (t - t_j) exp(-(t - t_j)/tau) for a unit
// amplitude synapse on a fixed dt grid. Tracks
//     a = sum_j exp(-(t - t_j)/tau),   b = sum_j (t - t_j) exp(-(t - t_j)/tau)
// and advances both by one dt with b' = (b + dt a) e, a' = a e, e = exp(-dt/tau).
class AlphaTrace {
public:
	AlphaTrace() = default;
	AlphaTrace(double tau, double dt) : decay_(std::exp(-dt / tau)), dt_(dt) {}

	void spike() { a_ += 1.0; }

	void advance()
	{
		b_ = (b_ + dt_ * a_) * decay_;
		a_ *= decay_;
		// flush once the last spike is ~40 tau old; the residual is below 1e-16
		if (a_ < 1e-18) {
			a_ = 0.0;
			b_ = 0.0;
		}
	}

	double value() const { return b_; }
	bool idle() const { return a_ == 0.0 && b_ == 0.0; }

private:
	double a_ = 0.0;
	double b_ = 0.0;
	double decay_ = 1.0;
	double dt_ = 0.0;
};


// Conductance amplitudes K_syn of every input -> output synapse. Row r is the
// input (frame * M + band), column c the output unit.
struct SynapseMatrix {
	int rows = 0;
	int cols = 0;
	double tau = 2.0;
	std::vector<double> k;

	SynapseMatrix() = default;
	SynapseMatrix(int r, int c, double tau_ms, double fill = 0.0)
		: rows(r), cols(c), tau(tau_ms), k(static_cast<std::size_t>(r) * c, fill) {}

	double &operator()(int r, int c) { return k[static_cast<std::size_t>(r) * cols + c]; }
	double operator()(int r, int c) const { return k[static_cast<std::size_t>(r) * cols + c]; }

	double column_l1(int c) const
	{
		double s = 0.0;
		for (int r = 0; r < rows; ++r)
			s += std::abs((*this)(r, c));
		return s;
	}

	friend bool operator==(const SynapseMatrix &, const SynapseMatrix &) = default;
};

// Text format: `rows cols tau` then one line per row. %.17g makes the round
// trip bit-exact.
inline std::string format_synapse_matrix(const SynapseMatrix &m)
{
	std::string out;
	char buf[40];
	std::snprintf(buf, sizeof buf, "%d %d %.17g\n", m.rows, m.cols, m.tau);
	out += buf;
	for (int r = 0; r < m.rows; ++r) {
		for (int c = 0; c < m.cols; ++c) {
			std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
			if (c)
				out += ' ';
			out += buf;
		}
		out += '\n';
	}
	return out;
}

inline SynapseMatrix parse_synapse_matrix(const std::string &text)
{
	std::istringstream in(text);
	SynapseMatrix m;
	std::string header;
	if (!std::getline(in, header))
		throw format_error("weights: empty file");
	{
		std::istringstream h(header);
		std::string tau_s;
		if (!(h >> m.rows >> m.cols >> tau_s) || m.rows <= 0 || m.cols <= 0)
			throw format_error("weights: bad header, expected 'rows cols tau'");
		char *end = nullptr;
		m.tau = std::strtod(tau_s.c_str(), &end);
		if (*end != '\0' || !(m.tau > 0.0))
			throw format_error("weights: bad tau");
	}
	m.k.assign(static_cast<std::size_t>(m.rows) * m.cols, 0.0);
	std::string tok;
	for (std::size_t i = 0; i < m.k.size(); ++i) {
		if (!(in >> tok))
			throw format_error("weights: expected " + std::to_string(m.k.size()) + " values");
		char *end = nullptr;
		m.k[i] = std::strtod(tok.c_str(), &end);
		if (*end != '\0' || !std::isfinite(m.k[i]))
			throw format_error("weights: bad value '" + tok + "'");
	}
	if (in >> tok)
		throw format_error("weights: trailing data");
	return m;
}

inline void write_synapse_matrix(const SynapseMatrix &m, const std::filesystem::path &path)
{
	std::ofstream out(path);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	out << format_synapse_matrix(m);
}

inline SynapseMatrix read_synapse_matrix(const std::filesystem::path &path)
{
	std::ifstream in(path);
	if (!in)
		throw io_error("cannot open '" + path.string() + "'");
	std::ostringstream buf;
	buf << in.rdbuf();
	return parse_synapse_matrix(buf.str());
}

} // namespace spikesig
