#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "spikesig/analysis.hpp"
#include "spikesig/corpus.hpp"
#include "spikesig/dsp.hpp"
#include "spikesig/errors.hpp"
#include "spikesig/network.hpp"

namespace spikesig {

// Everything one pipeline run depends on. The on-disk form is an INI file
// with one section per module; see config/default.ini for the full key list.
struct RunConfig {
	std::uint64_t seed = 1;
	int jobs = 1;

	// corpus
	int per_class = 50;
	double snr_db = 10.0;
	SynthOptions synth;

	FrameSpec frames;
	BandSpec bands;
	double i_min = 0.0;
	double i_max = 250.0;

	NetworkConfig network;
	StdpConfig stdp;

	double vp_q = 0.1; // 1/ms
	SvmConfig svm;

	// seeds of the three synthetic splits, all derived from `seed`
	std::uint64_t train_seed() const { return seed; }
	std::uint64_t test_seed() const { return seed + 1; }
	std::uint64_t noise_seed() const { return seed + 2; }

	void validate() const
	{
		if (jobs < 1)
			throw config_error("run.jobs must be >= 1");
		if (per_class < 1)
			throw config_error("corpus.per_class must be >= 1");
		if (!(synth.min_duration_ms >= 500.0 && synth.min_duration_ms <= synth.max_duration_ms &&
		      synth.max_duration_ms <= 1000.0))
			throw config_error("corpus: need 500 <= min_ms <= max_ms <= 1000");
		if (synth.sample_rate < 8000)
			throw config_error("corpus.sample_rate must be >= 8000");
		frames.validate();
		bands.validate();
		if (!(i_min < i_max))
			throw config_error("scaler: i_min must be below i_max");
		network.validate();
		stdp.validate();
		if (!(vp_q >= 0.0))
			throw config_error("vp.q must be >= 0");
		svm.validate();
		if (network.n_frames != frames.n_frames || network.n_bands != bands.n_bands)
			throw config_error("network shape must match frames.n_frames x bands.n_bands");
	}
};

namespace detail {

template <class T> T parse_number(const std::string &key, const std::string &text)
{
	T v{};
	const char *b = text.data(), *e = text.data() + text.size();
	auto [p, ec] = std::from_chars(b, e, v);
	if (ec != std::errc{} || p != e)
		throw config_error("bad value for " + key + ": '" + text + "'");
	return v;
}

// shortest text that reads back to the same double
inline std::string show(double v)
{
	char buf[40];
	const auto r = std::to_chars(buf, buf + sizeof buf, v);
	return std::string(buf, r.ptr);
}

struct Field {
	std::function<void(RunConfig &, const std::string &)> set;
	std::function<std::string(const RunConfig &)> get;
};

template <class T> Field field(T RunConfig::*m)
{
	return {[m](RunConfig &c, const std::string &s) { c.*m = parse_number<T>("", s); },
	        [m](const RunConfig &c) {
		        if constexpr (std::is_floating_point_v<T>)
			        return show(c.*m);
		        else
			        return std::to_string(c.*m);
	        }};
}

template <class T, class Sub> Field field(Sub RunConfig::*sub, T Sub::*m)
{
	return {[sub, m](RunConfig &c, const std::string &s) { (c.*sub).*m = parse_number<T>("", s); },
	        [sub, m](const RunConfig &c) {
		        if constexpr (std::is_floating_point_v<T>)
			        return show((c.*sub).*m);
		        else
			        return std::to_string((c.*sub).*m);
	        }};
}

template <class T> Field neuron_field(T IzhikevichParams::*m)
{
	return {[m](RunConfig &c, const std::string &s) { c.network.neuron.*m = parse_number<T>("", s); },
	        [m](const RunConfig &c) { return show(c.network.neuron.*m); }};
}

// "section.key" -> accessor, in canonical order
inline const std::vector<std::pair<std::string, Field>> &schema()
{
	static const std::vector<std::pair<std::string, Field>> s = [] {
		std::vector<std::pair<std::string, Field>> f;
		f.emplace_back("run.seed", field(&RunConfig::seed));
		f.emplace_back("run.jobs", field(&RunConfig::jobs));
		f.emplace_back("corpus.per_class", field(&RunConfig::per_class));
		f.emplace_back("corpus.snr_db", field(&RunConfig::snr_db));
		f.emplace_back("corpus.sample_rate", field(&RunConfig::synth, &SynthOptions::sample_rate));
		f.emplace_back("corpus.min_ms", field(&RunConfig::synth, &SynthOptions::min_duration_ms));
		f.emplace_back("corpus.max_ms", field(&RunConfig::synth, &SynthOptions::max_duration_ms));
		f.emplace_back("frames.n_frames", field(&RunConfig::frames, &FrameSpec::n_frames));
		f.emplace_back("frames.overlap", field(&RunConfig::frames, &FrameSpec::overlap));
		f.emplace_back("bands.range_hz", field(&RunConfig::bands, &BandSpec::range_hz));
		f.emplace_back("bands.n_bands", field(&RunConfig::bands, &BandSpec::n_bands));
		f.emplace_back("scaler.i_min", field(&RunConfig::i_min));
		f.emplace_back("scaler.i_max", field(&RunConfig::i_max));
		f.emplace_back("neuron.C", neuron_field(&IzhikevichParams::C));
		f.emplace_back("neuron.k", neuron_field(&IzhikevichParams::k));
		f.emplace_back("neuron.v_rest", neuron_field(&IzhikevichParams::v_rest));
		f.emplace_back("neuron.v_th", neuron_field(&IzhikevichParams::v_th));
		f.emplace_back("neuron.v_peak", neuron_field(&IzhikevichParams::v_peak));
		f.emplace_back("neuron.a", neuron_field(&IzhikevichParams::a));
		f.emplace_back("neuron.b", neuron_field(&IzhikevichParams::b));
		f.emplace_back("neuron.c", neuron_field(&IzhikevichParams::c));
		f.emplace_back("neuron.d", neuron_field(&IzhikevichParams::d));
		f.emplace_back("neuron.dt", neuron_field(&IzhikevichParams::dt));
		f.emplace_back("neuron.u0", neuron_field(&IzhikevichParams::u0));
		f.emplace_back("network.n_outputs", field(&RunConfig::network, &NetworkConfig::n_outputs));
		f.emplace_back("network.t_train", field(&RunConfig::network, &NetworkConfig::t_train));
		f.emplace_back("network.t_frame", field(&RunConfig::network, &NetworkConfig::t_frame));
		f.emplace_back("network.epochs", field(&RunConfig::network, &NetworkConfig::epochs));
		f.emplace_back("network.tau_syn", field(&RunConfig::network, &NetworkConfig::tau_syn));
		f.emplace_back("network.g_train", field(&RunConfig::network, &NetworkConfig::g_train));
		f.emplace_back("network.g_signature", field(&RunConfig::network, &NetworkConfig::g_signature));
		f.emplace_back("stdp.a_plus", field(&RunConfig::stdp, &StdpConfig::a_plus));
		f.emplace_back("stdp.b_minus", field(&RunConfig::stdp, &StdpConfig::b_minus));
		f.emplace_back("stdp.tau_plus", field(&RunConfig::stdp, &StdpConfig::tau_plus));
		f.emplace_back("stdp.tau_minus", field(&RunConfig::stdp, &StdpConfig::tau_minus));
		f.emplace_back("vp.q", field(&RunConfig::vp_q));
		f.emplace_back("svm.c", field(&RunConfig::svm, &SvmConfig::c));
		f.emplace_back("svm.iterations", field(&RunConfig::svm, &SvmConfig::iterations));
		f.emplace_back("svm.standardize",
		               Field{[](RunConfig &c, const std::string &s) {
			                     if (s == "true" || s == "1")
				                     c.svm.standardize = true;
			                     else if (s == "false" || s == "0")
				                     c.svm.standardize = false;
			                     else
				                     throw config_error("bad value for svm.standardize: '" + s + "'");
		                     },
		                     [](const RunConfig &c) { return std::string(c.svm.standardize ? "true" : "false"); }});
		f.emplace_back("svm.mode",
		               Field{[](RunConfig &c, const std::string &s) {
			                     if (s == "joint")
				                     c.svm.mode = SvmMode::joint;
			                     else if (s == "per_unit")
				                     c.svm.mode = SvmMode::per_unit;
			                     else
				                     throw config_error("svm.mode must be joint or per_unit, got '" + s + "'");
		                     },
		                     [](const RunConfig &c) {
			                     return std::string(c.svm.mode == SvmMode::joint ? "joint" : "per_unit");
		                     }});
		return f;
	}();
	return s;
}

inline const Field &lookup(const std::string &dotted)
{
	for (const auto &[name, f] : schema())
		if (name == dotted)
			return f;
	throw config_error("unknown config key '" + dotted + "'");
}

// keeps derived fields in step with the ones they mirror
inline void sync(RunConfig &c)
{
	c.network.n_frames = c.frames.n_frames;
	c.network.n_bands = c.bands.n_bands;
	c.network.seed = c.seed;
	c.svm.n_units = c.network.n_outputs;
}

} // namespace detail

// Sets one value from "section.key=value".
inline void apply_override(RunConfig &c, const std::string &assignment)
{
	const auto eq = assignment.find('=');
	if (eq == std::string::npos || eq == 0)
		throw config_error("override must look like section.key=value, got '" + assignment + "'");
	const std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
	const auto &f = detail::lookup(key);
	try {
		f.set(c, value);
	} catch (const config_error &) {
		throw config_error("bad value for " + key + ": '" + value + "'");
	}
	detail::sync(c);
}

inline RunConfig parse_config(std::istream &in)
{
	boost::property_tree::ptree tree;
	try {
		boost::property_tree::ini_parser::read_ini(in, tree);
	} catch (const boost::property_tree::ini_parser_error &e) {
		throw config_error(std::string("config: ") + e.what());
	}
	RunConfig c;
	for (const auto &[section, body] : tree) {
		if (body.empty())
			throw config_error("config: key '" + section + "' outside a section");
		for (const auto &[key, value] : body)
			apply_override(c, section + "." + key + "=" + value.get_value<std::string>());
	}
	detail::sync(c);
	c.validate();
	return c;
}

inline RunConfig load_config(const std::filesystem::path &path)
{
	std::ifstream in(path);
	if (!in)
		throw config_error("cannot open config '" + path.string() + "'");
	return parse_config(in);
}

// Canonical INI text: every key, fixed order, round-trip exact numbers.
inline std::string format_config(const RunConfig &c)
{
	std::string out, section;
	for (const auto &[name, f] : detail::schema()) {
		const auto dot = name.find('.');
		const std::string s = name.substr(0, dot);
		if (s != section) {
			if (!section.empty())
				out += '\n';
			out += "[" + s + "]\n";
			section = s;
		}
		out += name.substr(dot + 1) + " = " + f.get(c) + "\n";
	}
	return out;
}

// 64-bit FNV-1a of the canonical text.
inline std::uint64_t config_hash(const RunConfig &c)
{
	std::uint64_t h = 1469598103934665603ull;
	for (unsigned char ch : format_config(c)) {
		h ^= ch;
		h *= 1099511628211ull;
	}
	return h;
}

inline std::string hex64(std::uint64_t v)
{
	char buf[20];
	std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
	return buf;
}

} // namespace spikesig
