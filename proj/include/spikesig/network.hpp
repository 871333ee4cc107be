#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spikesig/dsp.hpp"
#include "spikesig/errors.hpp"
#include "spikesig/izhikevich.hpp"
#include "spikesig/synapse.hpp"

namespace spikesig {

// Shape and timing of the single-layer network: N*M afferent y units fully
// connected to `n_outputs` z units through alpha synapses.
struct NetworkConfig {
	int n_frames = 40;
	int n_bands = 5;
	int n_outputs = 10;
	double t_train = 100.0; // ms per training presentation
	double t_frame = 5.0;   // ms per frame during signature generation
	int epochs = 100;
	std::uint64_t seed = 1;
	double tau_syn = 2.0; // ms, alpha kernel peak time

	// Scale from the L1-normalized amplitudes K to conductance. Training drives
	// all N*M afferents at once while signature generation drives M at a time,
	// so each presentation mode has its own scale.
	double g_train = 18.0;
	double g_signature = 1500.0;

	IzhikevichParams neuron;

	int n_inputs() const { return n_frames * n_bands; }
	double dt() const { return neuron.dt; }

	void validate() const
	{
		neuron.validate();
		if (n_frames < 1 || n_bands < 1 || n_outputs < 2)
			throw config_error("network: need n_frames >= 1, n_bands >= 1, n_outputs >= 2");
		if (epochs < 0)
			throw config_error("network: epochs must be >= 0");
		if (!(tau_syn > 0.0))
			throw config_error("network: tau_syn must be positive");
		if (!(g_train >= 0.0) || !(g_signature >= 0.0))
			throw config_error("network: conductance scales must be non-negative");
		steps_for(t_train, dt());
		steps_for(t_frame, dt());
	}
};

enum class StdpRegime { hebbian, anti_hebbian };

// Pair-based STDP window. Updates are scaled by 0.01.
struct StdpConfig {
	double a_plus = 1.0;     // A > 0
	double b_minus = -1.0;   // B < 0
	double tau_plus = 10.0;  // ms
	double tau_minus = 10.0; // ms

	static constexpr double scale = 0.01;

	void validate() const
	{
		if (!(a_plus > 0.0) || !(b_minus < 0.0) || !(tau_plus > 0.0) || !(tau_minus > 0.0))
			throw config_error("stdp: require A > 0, B < 0, tau+ > 0, tau- > 0");
	}
};

// Weight change for one pre/post pairing with dt = t_post - t_pre. The
// anti-Hebbian window swaps the two case bodies (amplitude and time constant).
inline double stdp_dw(double dt_pair, const StdpConfig &cfg, StdpRegime regime)
{
	const bool causal = dt_pair >= 0.0;
	const double mag = std::abs(dt_pair);
	const bool ltp_body = (regime == StdpRegime::hebbian) == causal;
	if (ltp_body)
		return StdpConfig::scale * cfg.a_plus * std::exp(-mag / cfg.tau_plus);
	return StdpConfig::scale * cfg.b_minus * std::exp(-mag / cfg.tau_minus);
}

// Divides every output column by its L1 norm.
inline void l1_renormalize_in_place(SynapseMatrix &w)
{
	for (int c = 0; c < w.cols; ++c) {
		const double norm = w.column_l1(c);
		if (!(norm > 0.0) || !std::isfinite(norm))
			throw degenerate_error("l1_renormalize: column " + std::to_string(c) + " has zero norm");
		for (int r = 0; r < w.rows; ++r)
			w(r, c) /= norm;
	}
}

inline SynapseMatrix l1_renormalize(SynapseMatrix w)
{
	l1_renormalize_in_place(w);
	return w;
}

// Uniform(0, 1) amplitudes, then per-column L1 normalization.
inline SynapseMatrix init_weights(const NetworkConfig &cfg, std::uint64_t seed)
{
	std::mt19937_64 rng(seed);
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	SynapseMatrix w(cfg.n_inputs(), cfg.n_outputs, cfg.tau_syn);
	for (double &v : w.k) {
		do
			v = unit(rng);
		while (v == 0.0);
	}
	l1_renormalize_in_place(w);
	return w;
}

// Spike times (ms) of one presentation: pre[input], post[output].
struct SpikeRecord {
	std::vector<std::vector<double>> pre;
	std::vector<std::vector<double>> post;
};

// Multiplicative update K <- K (1 + dw) for every output unit that fired.
// The target unit learns with the Hebbian window, every other unit with the
// anti-Hebbian one. Nearest-neighbour pairing: each post spike pairs with the
// latest pre spike at or before it, each pre spike with the latest post spike
// strictly before it. Amplitudes are clamped at zero.
inline void apply_stdp_in_place(SynapseMatrix &w, const SpikeRecord &spikes, int target, const StdpConfig &cfg)
{
	if (static_cast<int>(spikes.pre.size()) != w.rows || static_cast<int>(spikes.post.size()) != w.cols)
		throw input_error("apply_stdp: spike record does not match weight shape");
	if (target < 0 || target >= w.cols)
		throw input_error("apply_stdp: teacher target out of range");
	for (int j = 0; j < w.cols; ++j) {
		const auto &post = spikes.post[static_cast<std::size_t>(j)];
		if (post.empty())
			continue;
		const StdpRegime regime = j == target ? StdpRegime::hebbian : StdpRegime::anti_hebbian;
		for (int k = 0; k < w.rows; ++k) {
			const auto &pre = spikes.pre[static_cast<std::size_t>(k)];
			if (pre.empty())
				continue;
			double factor = 1.0;
			std::size_t ip = 0;
			for (double tp : post) {
				while (ip < pre.size() && pre[ip] <= tp)
					++ip;
				if (ip > 0)
					factor = std::max(0.0, factor * (1.0 + stdp_dw(tp - pre[ip - 1], cfg, regime)));
			}
			std::size_t jp = 0;
			for (double tq : pre) {
				while (jp < post.size() && post[jp] < tq)
					++jp;
				if (jp > 0)
					factor = std::max(0.0, factor * (1.0 + stdp_dw(post[jp - 1] - tq, cfg, regime)));
			}
			// clamped after every pairing, so a weight driven to zero stays there
			w(k, j) *= factor;
		}
	}
}

inline SynapseMatrix apply_stdp(SynapseMatrix w, const SpikeRecord &spikes, int target, const StdpConfig &cfg)
{
	apply_stdp_in_place(w, spikes, target, cfg);
	return w;
}


// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

// y-unit spikes of a training presentation. They depend only on the injected
// currents, so they are computed once per sample and reused every epoch.
struct InputRaster {
	std::size_t n_steps = 0;
	std::vector<std::vector<double>> times; // per input, ms
	std::vector<std::pair<std::uint32_t, std::uint32_t>> events; // (step, input), step-ordered
};

inline InputRaster encode_inputs(const FeatureMatrix &currents, const NetworkConfig &cfg)
{
	if (currents.rows != cfg.n_frames || currents.cols != cfg.n_bands)
		throw input_error("encode_inputs: feature shape does not match the network");
	InputRaster r;
	r.n_steps = steps_for(cfg.t_train, cfg.dt());
	r.times.resize(static_cast<std::size_t>(cfg.n_inputs()));
	for (int k = 0; k < cfg.n_inputs(); ++k) {
		const double current = currents.values[static_cast<std::size_t>(k)];
		if (!std::isfinite(current))
			throw numeric_error("encode_inputs: non-finite current");
		NeuronState s = NeuronState::resting(cfg.neuron);
		for (std::size_t step = 0; step < r.n_steps; ++step)
			if (advance(s, cfg.neuron, current)) {
				r.times[static_cast<std::size_t>(k)].push_back(static_cast<double>(step) * cfg.dt());
				r.events.emplace_back(static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(k));
			}
	}
	std::stable_sort(r.events.begin(), r.events.end(),
	                 [](const auto &x, const auto &y) { return x.first < y.first; });
	return r;
}

// One training presentation: every afferent is driven concurrently for
// t_train ms. A y spike at step s reaches the z units from step s + 1.
inline SpikeRecord present_training(const InputRaster &inputs, const SynapseMatrix &w, const NetworkConfig &cfg)
{
	const int n_in = cfg.n_inputs(), n_out = cfg.n_outputs;
	if (w.rows != n_in || w.cols != n_out)
		throw input_error("present_training: weight shape does not match the network");
	SpikeRecord rec;
	rec.pre = inputs.times;
	rec.post.resize(static_cast<std::size_t>(n_out));

	std::vector<AlphaTrace> traces(static_cast<std::size_t>(n_in), AlphaTrace(cfg.tau_syn, cfg.dt()));
	std::vector<int> active;
	std::vector<char> is_active(static_cast<std::size_t>(n_in), 0);
	std::vector<NeuronState> z(static_cast<std::size_t>(n_out), NeuronState::resting(cfg.neuron));
	std::vector<double> g(static_cast<std::size_t>(n_out));
	std::size_t next_event = 0;

	for (std::size_t step = 0; step < inputs.n_steps; ++step) {
		std::fill(g.begin(), g.end(), 0.0);
		for (int k : active) {
			const double s = traces[static_cast<std::size_t>(k)].value();
			const double *row = &w.k[static_cast<std::size_t>(k) * n_out];
			for (int j = 0; j < n_out; ++j)
				g[static_cast<std::size_t>(j)] += row[j] * s;
		}
		const double t = static_cast<double>(step) * cfg.dt();
		for (int j = 0; j < n_out; ++j) {
			auto &zs = z[static_cast<std::size_t>(j)];
			const double current = synaptic_current(cfg.g_train * g[static_cast<std::size_t>(j)], zs.v);
			if (advance(zs, cfg.neuron, current))
				rec.post[static_cast<std::size_t>(j)].push_back(t);
		}
		while (next_event < inputs.events.size() && inputs.events[next_event].first == step) {
			const auto k = inputs.events[next_event].second;
			traces[k].spike();
			if (!is_active[k]) {
				is_active[k] = 1;
				active.push_back(static_cast<int>(k));
			}
			++next_event;
		}
		for (int k : active)
			traces[static_cast<std::size_t>(k)].advance();
	}
	for (const auto &zs : z)
		if (!std::isfinite(zs.v) || !std::isfinite(zs.u))
			throw numeric_error("present_training: output state diverged");
	return rec;
}


// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct EpochLog {
	int epoch = 0;
	double mean_abs_dk = 0.0;     // mean |K change| per synapse per sample
	double spikes_target = 0.0;   // mean target-unit spikes per sample
	double spikes_nontarget = 0.0; // mean spikes per non-target unit per sample
};

struct TrainResult {
	SynapseMatrix weights;
	std::vector<EpochLog> log;
};

// Called after every training sample with the renormalized weights.
using SampleObserver = std::function<void(int epoch, std::size_t sample, const SynapseMatrix &)>;

// `currents` are the scaled input grids of the labelled training clips.
inline TrainResult train(std::span<const FeatureMatrix> currents, const NetworkConfig &cfg, const StdpConfig &stdp,
                         std::uint64_t seed, const SampleObserver &observer = {})
{
	cfg.validate();
	stdp.validate();
	std::vector<InputRaster> rasters;
	rasters.reserve(currents.size());
	for (const auto &c : currents) {
		if (!c.label || *c.label < 0 || *c.label >= cfg.n_outputs)
			throw input_error("train: sample '" + c.id + "' has no valid label");
		rasters.push_back(encode_inputs(c, cfg));
	}

	std::mt19937_64 rng(seed);
	TrainResult result;
	result.weights = init_weights(cfg, rng());
	std::vector<std::size_t> order(currents.size());
	std::iota(order.begin(), order.end(), std::size_t{0});

	for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
		std::shuffle(order.begin(), order.end(), rng);
		EpochLog log;
		log.epoch = epoch;
		for (std::size_t i = 0; i < order.size(); ++i) {
			const std::size_t idx = order[i];
			const int target = *currents[idx].label;
			const SpikeRecord rec = present_training(rasters[idx], result.weights, cfg);
			SynapseMatrix updated = result.weights;
			apply_stdp_in_place(updated, rec, target, stdp);
			try {
				l1_renormalize_in_place(updated);
			} catch (const degenerate_error &e) {
				throw degenerate_error(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", sample '" +
				                       currents[idx].id + "')");
			}
			double dk = 0.0;
			for (std::size_t q = 0; q < updated.k.size(); ++q)
				dk += std::abs(updated.k[q] - result.weights.k[q]);
			log.mean_abs_dk += dk / static_cast<double>(updated.k.size());
			for (int j = 0; j < cfg.n_outputs; ++j) {
				const auto n = static_cast<double>(rec.post[static_cast<std::size_t>(j)].size());
				if (j == target)
					log.spikes_target += n;
				else
					log.spikes_nontarget += n / (cfg.n_outputs - 1);
			}
			result.weights = std::move(updated);
			if (observer)
				observer(epoch, i, result.weights);
		}
		if (!order.empty()) {
			const auto n = static_cast<double>(order.size());
			log.mean_abs_dk /= n;
			log.spikes_target /= n;
			log.spikes_nontarget /= n;
		}
		result.log.push_back(log);
	}
	return result;
}

inline void write_training_log_csv(const std::vector<EpochLog> &log, const std::filesystem::path &path,
                                   const std::string &header_comment = {})
{
	std::ofstream out(path);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	if (!header_comment.empty())
		out << "# " << header_comment << "\n";
	out << "epoch,mean_abs_dK,spikes_target,spikes_nontarget\n";
	char buf[128];
	for (const auto &e : log) {
		std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", e.epoch, e.mean_abs_dk, e.spikes_target,
		              e.spikes_nontarget);
		out << buf;
	}
}

// One binary PGM per output unit: N rows (frames, first at top) by M
// columns (bands, low frequency left), min/max normalized per unit.
inline void write_weight_image_pgm(const SynapseMatrix &w, int output, int n_frames, int n_bands,
                                   const std::filesystem::path &path)
{
	if (w.rows != n_frames * n_bands || output < 0 || output >= w.cols)
		throw input_error("weight image: shape mismatch");
	double lo = w(0, output), hi = lo;
	for (int r = 0; r < w.rows; ++r) {
		lo = std::min(lo, w(r, output));
		hi = std::max(hi, w(r, output));
	}
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	out << "P5\n" << n_bands << ' ' << n_frames << "\n255\n";
	const double span = hi > lo ? hi - lo : 1.0;
	for (int f = 0; f < n_frames; ++f)
		for (int b = 0; b < n_bands; ++b) {
			const double u = (w(f * n_bands + b, output) - lo) / span;
			out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u))));
		}
}

} // namespace spikesig
