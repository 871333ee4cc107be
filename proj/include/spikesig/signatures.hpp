#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "spikesig/dsp.hpp"
#include "spikesig/errors.hpp"
#include "spikesig/izhikevich.hpp"
#include "spikesig/network.hpp"
#include "spikesig/synapse.hpp"

namespace spikesig {

// Output of the trained network for one input: a spike train per output
// unit over N * t_frame ms, plus the net input of every unit at each dt step.
struct Signature {
	std::vector<SpikeTrain> trains;
	std::vector<std::vector<double>> net_input;
	double dt = 0.1;
	std::string id;
	std::optional<int> label;

	std::size_t total_spikes() const
	{
		std::size_t n = 0;
		for (const auto &t : trains)
			n += t.size();
		return n;
	}
};

// Frames are presented one after another for t_frame ms each. The M band
// neurons on the input side keep their state across frames; during frame f
// their spikes travel through the synapses of input row (f, band). Output
// neurons and synaptic conductances also carry over, so the whole signature
// is one continuous simulation. `reset_each_frame` restarts all neurons at
// rest at every frame boundary instead.
inline Signature signature(const FeatureMatrix &features, const SynapseMatrix &weights, const CurrentScaler &scaler,
                           const NetworkConfig &cfg, bool reset_each_frame = false)
{
	cfg.validate();
	if (features.rows != cfg.n_frames || features.cols != cfg.n_bands)
		throw input_error("signature: feature matrix '" + features.id + "' has the wrong shape");
	if (weights.rows != cfg.n_inputs() || weights.cols != cfg.n_outputs)
		throw input_error("signature: weight matrix does not match the network");

	const int n_out = cfg.n_outputs, n_bands = cfg.n_bands;
	const std::size_t per_frame = steps_for(cfg.t_frame, cfg.dt());
	const std::size_t total = per_frame * static_cast<std::size_t>(cfg.n_frames);
	const double duration = static_cast<double>(cfg.n_frames) * cfg.t_frame;

	Signature sig;
	sig.dt = cfg.dt();
	sig.id = features.id;
	sig.label = features.label;
	sig.trains.assign(static_cast<std::size_t>(n_out), SpikeTrain{{}, duration});
	sig.net_input.assign(static_cast<std::size_t>(n_out), std::vector<double>(total, 0.0));

	const FeatureMatrix currents = scale_to_current(features, scaler);
	std::vector<NeuronState> y(static_cast<std::size_t>(n_bands), NeuronState::resting(cfg.neuron));
	std::vector<NeuronState> z(static_cast<std::size_t>(n_out), NeuronState::resting(cfg.neuron));
	std::vector<AlphaTrace> traces(static_cast<std::size_t>(cfg.n_inputs()), AlphaTrace(cfg.tau_syn, cfg.dt()));
	std::vector<int> active;
	std::vector<double> g(static_cast<std::size_t>(n_out));

	for (std::size_t step = 0; step < total; ++step) {
		const int frame = static_cast<int>(step / per_frame);
		if (reset_each_frame && step % per_frame == 0) {
			for (auto &s : y)
				s = NeuronState::resting(cfg.neuron);
			for (auto &s : z)
				s = NeuronState::resting(cfg.neuron);
		}
		std::fill(g.begin(), g.end(), 0.0);
		for (int k : active) {
			const double s = traces[static_cast<std::size_t>(k)].value();
			const double *row = &weights.k[static_cast<std::size_t>(k) * n_out];
			for (int j = 0; j < n_out; ++j)
				g[static_cast<std::size_t>(j)] += row[j] * s;
		}
		const double t = static_cast<double>(step) * cfg.dt();
		for (int j = 0; j < n_out; ++j) {
			auto &zs = z[static_cast<std::size_t>(j)];
			const double current = synaptic_current(cfg.g_signature * g[static_cast<std::size_t>(j)], zs.v);
			sig.net_input[static_cast<std::size_t>(j)][step] = current;
			if (advance(zs, cfg.neuron, current))
				sig.trains[static_cast<std::size_t>(j)].times.push_back(t);
		}
		for (int b = 0; b < n_bands; ++b) {
			if (advance(y[static_cast<std::size_t>(b)], cfg.neuron, currents(frame, b))) {
				const int k = frame * n_bands + b;
				auto &tr = traces[static_cast<std::size_t>(k)];
				if (tr.idle())
					active.push_back(k);
				tr.spike();
			}
		}
		for (int k : active)
			traces[static_cast<std::size_t>(k)].advance();
		std::erase_if(active, [&](int k) { return traces[static_cast<std::size_t>(k)].idle(); });
	}
	for (const auto &zs : z)
		if (!std::isfinite(zs.v) || !std::isfinite(zs.u))
			throw numeric_error("signature: output state diverged");
	return sig;
}

// One signature per class, generated from the class-mean feature matrix.
struct PrototypeSet {
	std::vector<Signature> prototypes; // index = class
	std::vector<FeatureMatrix> mean_features;
};

// Element-wise class means. Members are summed in a canonical (sorted)
// order so the result does not depend on the order samples arrive in.
inline std::vector<FeatureMatrix> class_mean_features(std::span<const FeatureMatrix> training, int n_classes)
{
	std::vector<std::vector<const FeatureMatrix *>> by_class(static_cast<std::size_t>(n_classes));
	for (const auto &f : training) {
		if (!f.label || *f.label < 0 || *f.label >= n_classes)
			throw input_error("prototypes: sample '" + f.id + "' has no valid label");
		by_class[static_cast<std::size_t>(*f.label)].push_back(&f);
	}
	std::vector<FeatureMatrix> means;
	for (int c = 0; c < n_classes; ++c) {
		auto &members = by_class[static_cast<std::size_t>(c)];
		if (members.empty())
			throw input_error("prototypes: class " + std::to_string(c) + " has no training samples");
		std::sort(members.begin(), members.end(),
		          [](const FeatureMatrix *a, const FeatureMatrix *b) { return a->values < b->values; });
		FeatureMatrix mean(members.front()->rows, members.front()->cols);
		for (const auto *m : members) {
			if (m->rows != mean.rows || m->cols != mean.cols)
				throw input_error("prototypes: inconsistent feature shapes");
			for (std::size_t i = 0; i < mean.values.size(); ++i)
				mean.values[i] += m->values[i];
		}
		for (double &v : mean.values)
			v /= static_cast<double>(members.size());
		mean.id = "proto_" + std::to_string(c);
		mean.label = c;
		means.push_back(std::move(mean));
	}
	return means;
}

inline PrototypeSet prototypes(std::span<const FeatureMatrix> training, const SynapseMatrix &weights,
                               const CurrentScaler &scaler, const NetworkConfig &cfg)
{
	PrototypeSet set;
	set.mean_features = class_mean_features(training, cfg.n_outputs);
	for (const auto &m : set.mean_features)
		set.prototypes.push_back(signature(m, weights, scaler, cfg));
	return set;
}


// ---------------------------------------------------------------------------
// raster export
// ---------------------------------------------------------------------------

// One line per unit, space-separated spike times in ms.
inline std::string format_spike_text(std::span<const SpikeTrain> trains)
{
	std::string out;
	char buf[32];
	for (const auto &t : trains) {
		for (std::size_t i = 0; i < t.times.size(); ++i) {
			std::snprintf(buf, sizeof buf, "%.10g", t.times[i]);
			if (i)
				out += ' ';
			out += buf;
		}
		out += '\n';
	}
	return out;
}

inline std::vector<SpikeTrain> parse_spike_text(const std::string &text, double duration)
{
	std::vector<SpikeTrain> trains;
	std::istringstream in(text);
	std::string line;
	while (std::getline(in, line)) {
		SpikeTrain t;
		t.duration = duration;
		std::istringstream ls(line);
		std::string tok;
		while (ls >> tok) {
			char *end = nullptr;
			const double v = std::strtod(tok.c_str(), &end);
			if (*end != '\0' || !std::isfinite(v))
				throw format_error("spike file: bad time '" + tok + "'");
			if (!t.times.empty() && v <= t.times.back())
				throw format_error("spike file: times must be strictly increasing");
			t.times.push_back(v);
		}
		trains.push_back(std::move(t));
	}
	return trains;
}

// Raster with one row per train and time on the x axis; every spike is a
// single <line class="spike"> element.
inline std::string format_raster_svg(std::span<const SpikeTrain> trains, std::span<const std::string> row_labels,
                                     const std::string &title = {})
{
	const double duration = trains.empty() ? 200.0 : trains.front().duration;
	const double left = 60, right = 20, top = 30, row_h = 24, plot_w = 600;
	const double height = top + row_h * static_cast<double>(trains.size()) + 40;
	std::ostringstream svg;
	svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + plot_w + right << "\" height=\"" << height
	    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
	if (!title.empty())
		svg << "<text x=\"" << left << "\" y=\"18\">" << title << "</text>\n";
	for (std::size_t r = 0; r < trains.size(); ++r) {
		const double y0 = top + row_h * static_cast<double>(r);
		const std::string label = r < row_labels.size() ? row_labels[r] : std::to_string(r);
		svg << "<text x=\"" << left - 8 << "\" y=\"" << y0 + row_h * 0.65 << "\" text-anchor=\"end\">" << label
		    << "</text>\n";
		svg << "<line x1=\"" << left << "\" y1=\"" << y0 + row_h << "\" x2=\"" << left + plot_w << "\" y2=\""
		    << y0 + row_h << "\" stroke=\"#ddd\"/>\n";
		for (double t : trains[r].times) {
			const double x = left + plot_w * t / duration;
			svg << "<line class=\"spike\" x1=\"" << x << "\" y1=\"" << y0 + 3 << "\" x2=\"" << x << "\" y2=\""
			    << y0 + row_h - 3 << "\" stroke=\"black\"/>\n";
		}
	}
	const double axis_y = top + row_h * static_cast<double>(trains.size()) + 16;
	for (int tick = 0; tick <= 4; ++tick) {
		const double t = duration * tick / 4.0;
		svg << "<text x=\"" << left + plot_w * tick / 4.0 << "\" y=\"" << axis_y << "\" text-anchor=\"middle\">" << t
		    << "</text>\n";
	}
	svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << axis_y + 16 << "\" text-anchor=\"middle\">time (ms)</text>\n";
	svg << "</svg>\n";
	return svg.str();
}

namespace detail {

inline void write_text_file(const std::filesystem::path &path, const std::string &text)
{
	std::ofstream out(path);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	out << text;
	if (!out)
		throw io_error("write failed for '" + path.string() + "'");
}

} // namespace detail

// Writes `<stem>.spikes` and `<stem>.svg` for one signature.
inline void export_raster(const Signature &sig, const std::filesystem::path &stem)
{
	std::vector<std::string> labels;
	for (std::size_t u = 0; u < sig.trains.size(); ++u)
		labels.push_back("z" + std::to_string(u));
	std::string title = sig.id;
	if (sig.label)
		title += " (class " + std::to_string(*sig.label) + ")";
	detail::write_text_file(stem.string() + ".spikes", format_spike_text(sig.trains));
	detail::write_text_file(stem.string() + ".svg", format_raster_svg(sig.trains, labels, title));
}

// `proto_<digit>.spikes` per class plus `prototypes.svg`, whose row c is the
// class-c unit's response to the class-c prototype.
inline void export_prototypes(const PrototypeSet &set, const std::filesystem::path &dir)
{
	std::filesystem::create_directories(dir);
	std::vector<SpikeTrain> rows;
	std::vector<std::string> labels;
	for (std::size_t c = 0; c < set.prototypes.size(); ++c) {
		const auto &p = set.prototypes[c];
		detail::write_text_file(dir / ("proto_" + std::to_string(c) + ".spikes"), format_spike_text(p.trains));
		rows.push_back(p.trains[c]);
		labels.push_back(std::to_string(c));
	}
	detail::write_text_file(dir / "prototypes.svg", format_raster_svg(rows, labels, "prototype signatures"));
}

} // namespace spikesig
