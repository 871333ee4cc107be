#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spikesig/errors.hpp"

namespace spikesig {

inline constexpr int n_digit_classes = 10;

struct AudioClip {
	std::vector<double> samples; // amplitudes, nominally in [-1, 1]
	int sample_rate = 8000;      // Hz
	std::optional<int> label;    // digit class 0..9
	std::string id;

	double duration_ms() const
	{
		return sample_rate > 0 ? 1000.0 * static_cast<double>(samples.size()) / sample_rate : 0.0;
	}
};

// Throws input_error when the clip breaks the AudioClip invariants
// (duration in (0, 10] s, positive rate, label in 0..9).
inline void validate(const AudioClip &clip)
{
	if (clip.sample_rate <= 0)
		throw input_error("clip '" + clip.id + "': sample rate must be positive");
	if (clip.samples.empty())
		throw input_error("clip '" + clip.id + "': no samples");
	if (clip.duration_ms() > 10000.0)
		throw input_error("clip '" + clip.id + "': longer than 10 s");
	if (clip.label && (*clip.label < 0 || *clip.label >= n_digit_classes))
		throw input_error("clip '" + clip.id + "': label out of range");
}

inline double signal_power(const std::vector<double> &x)
{
	if (x.empty())
		return 0.0;
	double acc = 0.0;
	for (double v : x)
		acc += v * v;
	return acc / static_cast<double>(x.size());
}


// ---------------------------------------------------------------------------
// WAV (RIFF, PCM, mono, 8/16 bit)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32le(const unsigned char *p)
{
	return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
	       (std::uint32_t(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char *p)
{
	return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32le(std::string &out, std::uint32_t v)
{
	for (int i = 0; i < 4; ++i)
		out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16le(std::string &out, std::uint16_t v)
{
	out.push_back(static_cast<char>(v & 0xff));
	out.push_back(static_cast<char>((v >> 8) & 0xff));
}

} // namespace detail

inline AudioClip parse_wav(const std::string &bytes, const std::string &id = {})
{
	const auto *data = reinterpret_cast<const unsigned char *>(bytes.data());
	const std::size_t size = bytes.size();
	if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
		throw format_error("'" + id + "': not a RIFF/WAVE file");

	bool have_fmt = false;
	std::uint16_t channels = 0, bits = 0;
	std::uint32_t rate = 0;
	const unsigned char *pcm = nullptr;
	std::size_t pcm_bytes = 0;

	std::size_t pos = 12;
	while (pos + 8 <= size) {
		const unsigned char *chunk = data + pos;
		const std::uint32_t len = detail::read_u32le(chunk + 4);
		if (len > size - pos - 8)
			throw format_error("'" + id + "': chunk overruns file");
		if (std::memcmp(chunk, "fmt ", 4) == 0) {
			if (len < 16)
				throw format_error("'" + id + "': fmt chunk too short");
			const std::uint16_t codec = detail::read_u16le(chunk + 8);
			channels = detail::read_u16le(chunk + 10);
			rate = detail::read_u32le(chunk + 12);
			bits = detail::read_u16le(chunk + 22);
			if (codec != 1)
				throw unsupported_format_error("'" + id + "': only PCM codec is supported");
			have_fmt = true;
		} else if (std::memcmp(chunk, "data", 4) == 0) {
			pcm = chunk + 8;
			pcm_bytes = len;
		}
		pos += 8 + len + (len & 1u);
	}
	if (!have_fmt)
		throw format_error("'" + id + "': missing fmt chunk");
	if (!pcm)
		throw format_error("'" + id + "': missing data chunk");
	if (channels != 1)
		throw unsupported_format_error("'" + id + "': only mono audio is supported");
	if (bits != 8 && bits != 16)
		throw unsupported_format_error("'" + id + "': only 8 or 16 bits per sample are supported");
	if (rate == 0)
		throw format_error("'" + id + "': zero sample rate");

	AudioClip clip;
	clip.id = id;
	clip.sample_rate = static_cast<int>(rate);
	if (bits == 8) {
		clip.samples.resize(pcm_bytes);
		for (std::size_t i = 0; i < pcm_bytes; ++i)
			clip.samples[i] = (static_cast<double>(pcm[i]) - 128.0) / 128.0;
	} else {
		const std::size_t n = pcm_bytes / 2;
		clip.samples.resize(n);
		for (std::size_t i = 0; i < n; ++i) {
			const auto raw = static_cast<std::int16_t>(detail::read_u16le(pcm + 2 * i));
			clip.samples[i] = static_cast<double>(raw) / 32768.0;
		}
	}
	if (clip.samples.empty())
		throw format_error("'" + id + "': empty data chunk");
	validate(clip);
	return clip;
}

inline AudioClip load_wav(const std::filesystem::path &path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw io_error("cannot open '" + path.string() + "'");
	std::ostringstream buf;
	buf << in.rdbuf();
	return parse_wav(buf.str(), path.stem().string());
}

// 16-bit PCM encoding. Samples outside [-1, 1) are clamped by quantization.
inline std::string encode_wav(const AudioClip &clip)
{
	const auto n = static_cast<std::uint32_t>(clip.samples.size());
	std::string out;
	out.reserve(44 + 2 * n);
	out += "RIFF";
	detail::put_u32le(out, 36 + 2 * n);
	out += "WAVEfmt ";
	detail::put_u32le(out, 16);
	detail::put_u16le(out, 1);
	detail::put_u16le(out, 1);
	detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
	detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
	detail::put_u16le(out, 2);
	detail::put_u16le(out, 16);
	out += "data";
	detail::put_u32le(out, 2 * n);
	for (double s : clip.samples) {
		const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
		detail::put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
	}
	return out;
}

inline void write_wav(const AudioClip &clip, const std::filesystem::path &path)
{
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	const std::string bytes = encode_wav(clip);
	out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
	if (!out)
		throw io_error("write failed for '" + path.string() + "'");
}


// ---------------------------------------------------------------------------
// manifest CSV: header `path,label`, one clip per line
// ---------------------------------------------------------------------------

enum class Split { train, test_clean, test_noisy };

inline const char *split_name(Split s)
{
	switch (s) {
	case Split::train:
		return "train";
	case Split::test_clean:
		return "test-clean";
	case Split::test_noisy:
		return "test-noisy";
	}
	return "?";
}

inline std::optional<Split> parse_split(const std::string &name)
{
	if (name == "train")
		return Split::train;
	if (name == "test-clean")
		return Split::test_clean;
	if (name == "test-noisy")
		return Split::test_noisy;
	return std::nullopt;
}

struct ManifestEntry {
	std::string path; // relative to the manifest's directory unless absolute
	int label = 0;
};

struct CorpusManifest {
	std::vector<ManifestEntry> entries;
	Split split = Split::train;
};

inline void validate(const CorpusManifest &m)
{
	std::set<std::string> seen;
	for (const auto &e : m.entries) {
		if (e.label < 0 || e.label >= n_digit_classes)
			throw format_error("manifest: label out of range for '" + e.path + "'");
		if (!seen.insert(e.path).second)
			throw format_error("manifest: duplicate path '" + e.path + "'");
	}
}

inline std::string format_manifest(const CorpusManifest &m)
{
	std::string out = "path,label\n";
	for (const auto &e : m.entries)
		out += e.path + "," + std::to_string(e.label) + "\n";
	return out;
}

inline CorpusManifest parse_manifest(std::istream &in, Split split)
{
	CorpusManifest m;
	m.split = split;
	std::string line;
	if (!std::getline(in, line))
		throw format_error("manifest: empty file");
	if (!line.empty() && line.back() == '\r')
		line.pop_back();
	if (line != "path,label")
		throw format_error("manifest: expected header 'path,label'");
	int lineno = 1;
	while (std::getline(in, line)) {
		++lineno;
		if (!line.empty() && line.back() == '\r')
			line.pop_back();
		if (line.empty())
			continue;
		const auto comma = line.rfind(',');
		if (comma == std::string::npos || comma == 0)
			throw format_error("manifest line " + std::to_string(lineno) + ": expected path,label");
		ManifestEntry e;
		e.path = line.substr(0, comma);
		const std::string lab = line.substr(comma + 1);
		if (lab.size() != 1 || lab[0] < '0' || lab[0] > '9')
			throw format_error("manifest line " + std::to_string(lineno) + ": bad label '" + lab + "'");
		e.label = lab[0] - '0';
		m.entries.push_back(std::move(e));
	}
	validate(m);
	return m;
}

// The split is taken from the file stem (train.csv, test-clean.csv, test-noisy.csv).
inline CorpusManifest read_manifest(const std::filesystem::path &path)
{
	const auto split = parse_split(path.stem().string());
	if (!split)
		throw format_error("manifest '" + path.string() +
		                   "': file name must be train.csv, test-clean.csv or test-noisy.csv");
	std::ifstream in(path);
	if (!in)
		throw io_error("cannot open manifest '" + path.string() + "'");
	return parse_manifest(in, *split);
}

inline void write_manifest(const CorpusManifest &m, const std::filesystem::path &path)
{
	validate(m);
	std::ofstream out(path);
	if (!out)
		throw io_error("cannot write manifest '" + path.string() + "'");
	out << format_manifest(m);
}

// Loads every clip of a manifest; relative paths resolve against the manifest
// directory and labels come from the manifest.
inline std::vector<AudioClip> load_manifest_clips(const std::filesystem::path &manifest_path)
{
	const CorpusManifest m = read_manifest(manifest_path);
	const auto base = manifest_path.parent_path();
	std::vector<AudioClip> clips;
	clips.reserve(m.entries.size());
	for (const auto &e : m.entries) {
		std::filesystem::path p(e.path);
		if (p.is_relative())
			p = base / p;
		AudioClip c = load_wav(p);
		c.id = e.path;
		c.label = e.label;
		clips.push_back(std::move(c));
	}
	return clips;
}


// ---------------------------------------------------------------------------
// synthetic digit corpus
// ---------------------------------------------------------------------------

struct SynthOptions {
	int sample_rate = 8000;
	double min_duration_ms = 500.0;
	double max_duration_ms = 1000.0;
};

namespace synth {

inline constexpr int n_segments = 4;
inline constexpr int n_bands = 5;

// Edges of the five Fibonacci-width bands over 0..4000 Hz.
inline constexpr std::array<double, n_bands + 1> band_edges_hz{
	0.0, 4000.0 / 12, 2 * 4000.0 / 12, 4 * 4000.0 / 12, 7 * 4000.0 / 12, 4000.0};

// Spectral-density level (dB) of each band in each temporal segment, per
// class. Level codes: 0 -> 0 dB, 1 -> -8 dB, 2 -> -16 dB, 3 -> silent.
// Rows are segments, characters are bands (low to high).
inline constexpr std::array<std::array<const char *, n_segments>, n_digit_classes> class_patterns{{
	{"01233", "00133", "01123", "12333"}, // 0
	{"10333", "00233", "01333", "23333"}, // 1
	{"02313", "01203", "01233", "13333"}, // 2
	{"00320", "01310", "02321", "13333"}, // 3
	{"21033", "10133", "20233", "33333"}, // 4
	{"03330", "02231", "01121", "12232"}, // 5
	{"33100", "22100", "21001", "32223"}, // 6
	{"00032", "10123", "20233", "12333"}, // 7
	{"12301", "02201", "00211", "11333"}, // 8
	{"31130", "20022", "10333", "00332"}, // 9
}};

inline constexpr std::array<double, 4> level_db{0.0, -8.0, -16.0, -45.0};

// Tones are laid out on a comb inside each band; spacing is fine enough that
// frames of 25..50 ms see a continuous band rather than isolated lines.
inline constexpr double tone_spacing_hz = 40.0;

// Power of the 0 dB spectrum when every band is at 0 dB.
inline constexpr double reference_power = 0.02;

// White noise floor standard deviation (faint recording floor).
inline constexpr double floor_std = 3e-4;

inline std::uint64_t clip_seed(std::uint64_t seed, int label, int index)
{
	std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
	                  static_cast<std::uint32_t>(label), static_cast<std::uint32_t>(index), 0x5eedu};
	std::array<std::uint32_t, 2> out{};
	seq.generate(out.begin(), out.end());
	return (std::uint64_t(out[0]) << 32) | out[1];
}

inline double smoothstep(double x)
{
	x = std::clamp(x, 0.0, 1.0);
	return 0.5 - 0.5 * std::cos(M_PI * x);
}

// One clip of class `label`. All randomness flows from `rng`.
inline AudioClip make_clip(int label, std::mt19937_64 &rng, const SynthOptions &opt)
{
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	const double duration_ms =
		opt.min_duration_ms + (opt.max_duration_ms - opt.min_duration_ms) * unit(rng);
	const double pitch = 0.96 + 0.08 * unit(rng);
	const double gain_db = -2.0 + 4.0 * unit(rng);

	// per-sample jitter of each (segment, band) level: +-2 dB
	std::array<std::array<double, n_bands>, n_segments> amp{};
	for (int s = 0; s < n_segments; ++s)
		for (int b = 0; b < n_bands; ++b) {
			const int code = class_patterns[label][s][b] - '0';
			double db = level_db[code] + gain_db;
			if (code != 3)
				db += -2.0 + 4.0 * unit(rng);
			amp[s][b] = std::pow(10.0, db / 20.0);
		}

	// internal segment boundaries, jittered by +-4% of the duration
	std::array<double, n_segments + 1> bounds{};
	for (int s = 0; s <= n_segments; ++s)
		bounds[s] = static_cast<double>(s) / n_segments;
	for (int s = 1; s < n_segments; ++s)
		bounds[s] += -0.04 + 0.08 * unit(rng);

	const auto n = static_cast<std::size_t>(std::llround(duration_ms * opt.sample_rate / 1000.0));
	const double nyquist = opt.sample_rate / 2.0;

	struct Tone {
		int band;
		std::complex<double> phasor, rot;
	};
	std::vector<Tone> tones;
	int total_tones = 0;
	for (int b = 0; b < n_bands; ++b)
		total_tones += static_cast<int>((band_edges_hz[b + 1] - band_edges_hz[b]) / tone_spacing_hz);
	const double tone_amp = std::sqrt(2.0 * reference_power / total_tones);
	for (int b = 0; b < n_bands; ++b) {
		const double lo = band_edges_hz[b], hi = band_edges_hz[b + 1];
		const int count = static_cast<int>((hi - lo) / tone_spacing_hz);
		for (int i = 0; i < count; ++i) {
			const double f = pitch * (lo + (i + 0.2 + 0.6 * unit(rng)) * (hi - lo) / count);
			const double phase = 2.0 * M_PI * unit(rng);
			if (f >= nyquist - 10.0)
				continue;
			tones.push_back({b, std::polar(tone_amp, phase),
			                 std::polar(1.0, 2.0 * M_PI * f / opt.sample_rate)});
		}
	}

	// crossfade width between segments, in units of normalized time
	const double fade = 15.0 / duration_ms;

	AudioClip clip;
	clip.sample_rate = opt.sample_rate;
	clip.label = label;
	clip.samples.assign(n, 0.0);
	std::normal_distribution<double> floor_noise(0.0, floor_std);
	std::array<double, n_bands> env{};
	for (std::size_t i = 0; i < n; ++i) {
		const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
		// blend weights of each segment around its boundaries
		env.fill(0.0);
		for (int s = 0; s < n_segments; ++s) {
			double w = 1.0;
			if (s > 0)
				w *= smoothstep((u - bounds[s]) / fade + 0.5);
			if (s < n_segments - 1)
				w *= 1.0 - smoothstep((u - bounds[s + 1]) / fade + 0.5);
			if (w <= 0.0)
				continue;
			for (int b = 0; b < n_bands; ++b)
				env[b] += w * amp[s][b];
		}
		// short onset/offset ramps (5 ms)
		const double t_ms = 1000.0 * static_cast<double>(i) / opt.sample_rate;
		const double ramp = smoothstep(std::min(t_ms, duration_ms - t_ms) / 5.0);

		double x = 0.0;
		for (auto &tone : tones) {
			x += env[tone.band] * tone.phasor.real();
			tone.phasor *= tone.rot;
		}
		clip.samples[i] = ramp * x + floor_noise(rng);
	}
	return clip;
}

} // namespace synth

// `per_class` clips of each digit, ordered by label then index. Clip ids are
// `<label>_<index>`. Identical seeds give bit-identical samples.
inline std::vector<AudioClip> synth_corpus(std::uint64_t seed, int per_class, const SynthOptions &opt = {})
{
	if (per_class < 1)
		throw config_error("synth_corpus: per_class must be >= 1");
	if (opt.min_duration_ms < 500.0 || opt.max_duration_ms > 1000.0 ||
	    opt.min_duration_ms > opt.max_duration_ms)
		throw config_error("synth_corpus: duration range must lie within [500, 1000] ms");
	if (opt.sample_rate < 8000)
		throw config_error("synth_corpus: sample rate must be at least 8000 Hz");

	std::vector<AudioClip> clips;
	clips.reserve(static_cast<std::size_t>(per_class) * n_digit_classes);
	for (int label = 0; label < n_digit_classes; ++label)
		for (int i = 0; i < per_class; ++i) {
			std::mt19937_64 rng(synth::clip_seed(seed, label, i));
			AudioClip c = synth::make_clip(label, rng, opt);
			c.id = std::to_string(label) + "_" + std::to_string(i);
			clips.push_back(std::move(c));
		}
	return clips;
}


// ---------------------------------------------------------------------------
// additive white Gaussian noise
// ---------------------------------------------------------------------------

inline constexpr double no_noise = std::numeric_limits<double>::infinity();

// Noise power is P_signal / 10^(snr_db / 10). Samples are not clamped; the
// WAV writer clamps on quantization.
inline AudioClip add_noise(const AudioClip &clip, double snr_db, std::uint64_t seed)
{
	if (std::isinf(snr_db) && snr_db > 0)
		return clip;
	if (std::isnan(snr_db))
		throw config_error("add_noise: SNR is NaN");
	const double p_signal = signal_power(clip.samples);
	if (!(p_signal > 0.0))
		throw degenerate_error("add_noise: clip '" + clip.id + "' is silent");
	const double sigma = std::sqrt(p_signal / std::pow(10.0, snr_db / 10.0));
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> noise(0.0, sigma);
	AudioClip out = clip;
	for (double &s : out.samples)
		s += noise(rng);
	return out;
}

} // namespace spikesig
