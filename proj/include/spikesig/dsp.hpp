#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fftw3.h>

#include "spikesig/corpus.hpp"
#include "spikesig/errors.hpp"

namespace spikesig {

// Spectral floor that keeps log power finite for silent bins.
inline constexpr double spectral_floor = 1e-12;

struct FrameSpec {
	int n_frames = 40;     // N
	double overlap = 0.5;  // gamma, in [0, 1)

	void validate() const
	{
		if (n_frames < 2)
			throw config_error("frame spec: n_frames must be >= 2");
		if (!(overlap >= 0.0 && overlap < 1.0))
			throw config_error("frame spec: overlap must lie in [0, 1)");
	}
};

// Frame length in ms so that N frames with fractional overlap gamma tile a
// clip of L ms exactly.
inline double window_size(double clip_ms, int n_frames, double overlap)
{
	return clip_ms / (n_frames * (1.0 - overlap) + overlap);
}

struct BandSpec {
	double range_hz = 4000.0; // R
	int n_bands = 5;          // M

	void validate() const
	{
		if (!(range_hz > 0.0))
			throw config_error("band spec: range must be positive");
		if (n_bands < 1 || n_bands > 40)
			throw config_error("band spec: n_bands must be in [1, 40]");
	}

	// fib(1..M) = 1, 1, 2, 3, 5, ...
	std::vector<double> widths_in_units() const
	{
		std::vector<double> w(static_cast<std::size_t>(n_bands));
		double a = 1, b = 1;
		for (auto &x : w) {
			x = a;
			const double next = a + b;
			a = b;
			b = next;
		}
		return w;
	}

	// x such that sum_i fib(i) * x = R
	double unit_hz() const
	{
		const auto w = widths_in_units();
		return range_hz / std::accumulate(w.begin(), w.end(), 0.0);
	}

	// M + 1 strictly increasing edges from 0 to R
	std::vector<double> edges() const
	{
		const auto w = widths_in_units();
		const double x = unit_hz();
		std::vector<double> e{0.0};
		double acc = 0.0;
		for (std::size_t i = 0; i + 1 < w.size(); ++i) {
			acc += w[i];
			e.push_back(acc * x);
		}
		e.push_back(range_hz);
		return e;
	}
};

// N x M band energies of one clip, row-major with rows in temporal order.
struct FeatureMatrix {
	int rows = 0;
	int cols = 0;
	std::vector<double> values;
	std::string id;
	std::optional<int> label;

	FeatureMatrix() = default;
	FeatureMatrix(int r, int c, double fill = 0.0)
		: rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

	double &operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
	double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

inline double frobenius_distance(const FeatureMatrix &a, const FeatureMatrix &b)
{
	if (a.rows != b.rows || a.cols != b.cols)
		throw input_error("frobenius_distance: shape mismatch");
	double acc = 0.0;
	for (std::size_t i = 0; i < a.values.size(); ++i) {
		const double d = a.values[i] - b.values[i];
		acc += d * d;
	}
	return std::sqrt(acc);
}


// ---------------------------------------------------------------------------
// framing
// ---------------------------------------------------------------------------

inline std::vector<double> hamming_window(std::size_t length)
{
	std::vector<double> w(length, 1.0);
	if (length < 2)
		return w;
	const double denom = static_cast<double>(length - 1);
	for (std::size_t n = 0; n < length; ++n)
		w[n] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(n) / denom);
	return w;
}

struct FrameLayout {
	std::size_t window_samples = 0;
	std::size_t hop_samples = 0;
};

// Window length rounds window_ms * rate / 1000; hop rounds window * (1 - gamma).
inline FrameLayout frame_layout(std::size_t n_samples, int sample_rate, const FrameSpec &spec)
{
	spec.validate();
	const double clip_ms = 1000.0 * static_cast<double>(n_samples) / sample_rate;
	const double win_ms = window_size(clip_ms, spec.n_frames, spec.overlap);
	const double win = std::round(win_ms * sample_rate / 1000.0);
	if (win < 1.0)
		throw degenerate_error("frame_clip: window shorter than one sample");
	FrameLayout layout;
	layout.window_samples = static_cast<std::size_t>(win);
	layout.hop_samples = static_cast<std::size_t>(std::round(win * (1.0 - spec.overlap)));
	return layout;
}

inline std::vector<std::vector<double>> frame_clip(const AudioClip &clip, const FrameSpec &spec)
{
	if (clip.sample_rate <= 0 || clip.duration_ms() < 1.0)
		throw degenerate_error("frame_clip: clip '" + clip.id + "' is shorter than 1 ms");
	const FrameLayout layout = frame_layout(clip.samples.size(), clip.sample_rate, spec);
	const auto window = hamming_window(layout.window_samples);
	std::vector<std::vector<double>> frames(static_cast<std::size_t>(spec.n_frames));
	for (std::size_t f = 0; f < frames.size(); ++f) {
		auto &frame = frames[f];
		frame.assign(layout.window_samples, 0.0);
		const std::size_t start = f * layout.hop_samples;
		for (std::size_t n = 0; n < layout.window_samples; ++n) {
			const std::size_t idx = start + n;
			if (idx < clip.samples.size())
				frame[n] = clip.samples[idx] * window[n];
		}
	}
	return frames;
}


// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

inline std::size_t next_pow2(std::size_t n)
{
	std::size_t p = 1;
	while (p < n)
		p <<= 1;
	return p;
}

namespace detail {

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and executed with the new-array interface afterwards.
class r2c_plans {
public:
	static fftw_plan get(std::size_t n)
	{
		static r2c_plans instance;
		std::lock_guard<std::mutex> lock(instance.mutex_);
		auto it = instance.plans_.find(n);
		if (it != instance.plans_.end())
			return it->second;
		std::vector<double> in(n);
		std::vector<fftw_complex> out(n / 2 + 1);
		fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
		                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
		instance.plans_.emplace(n, p);
		return p;
	}

	~r2c_plans()
	{
		for (auto &[n, p] : plans_)
			fftw_destroy_plan(p);
	}

private:
	std::mutex mutex_;
	std::map<std::size_t, fftw_plan> plans_;
};

} // namespace detail

// |DFT|^2 of the frame zero-padded to the next power of two; bins 0..n/2.
inline std::vector<double> power_spectrum(std::span<const double> frame)
{
	if (frame.empty())
		throw input_error("frame_spectrum: empty frame");
	const std::size_t n = next_pow2(frame.size());
	std::vector<double> in(n, 0.0);
	std::copy(frame.begin(), frame.end(), in.begin());
	std::vector<fftw_complex> out(n / 2 + 1);
	fftw_execute_dft_r2c(detail::r2c_plans::get(n), in.data(), out.data());
	std::vector<double> power(out.size());
	for (std::size_t k = 0; k < out.size(); ++k)
		power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
	return power;
}

// log(|DFT|^2 + eps) over the non-negative frequencies.
inline std::vector<double> frame_spectrum(std::span<const double> frame)
{
	auto p = power_spectrum(frame);
	for (double &v : p)
		v = std::log(v + spectral_floor);
	return p;
}

// Mean of the log-power bins whose centre frequency lies in [lo, hi) of each
// band. `spectrum` holds bins 0..n/2 of an n-point transform.
inline std::vector<double> band_energies(std::span<const double> spectrum, const BandSpec &bands,
                                         int sample_rate)
{
	if (spectrum.size() < 2)
		throw input_error("band_energies: spectrum needs at least two bins");
	const std::size_t nfft = 2 * (spectrum.size() - 1);
	const auto edges = bands.edges();
	std::vector<double> sum(static_cast<std::size_t>(bands.n_bands), 0.0);
	std::vector<int> count(static_cast<std::size_t>(bands.n_bands), 0);
	std::size_t band = 0;
	for (std::size_t k = 0; k < spectrum.size(); ++k) {
		const double f = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
		while (band < sum.size() && f >= edges[band + 1])
			++band;
		if (band >= sum.size())
			break;
		sum[band] += spectrum[k];
		++count[band];
	}
	const double empty = std::log(spectral_floor);
	for (std::size_t b = 0; b < sum.size(); ++b)
		sum[b] = count[b] ? sum[b] / count[b] : empty;
	return sum;
}

inline FeatureMatrix features(const AudioClip &clip, const FrameSpec &frame_spec, const BandSpec &band_spec)
{
	band_spec.validate();
	const auto frames = frame_clip(clip, frame_spec);
	FeatureMatrix fm(frame_spec.n_frames, band_spec.n_bands);
	fm.id = clip.id;
	fm.label = clip.label;
	for (int f = 0; f < frame_spec.n_frames; ++f) {
		const auto spec = frame_spectrum(frames[static_cast<std::size_t>(f)]);
		const auto e = band_energies(spec, band_spec, clip.sample_rate);
		for (int b = 0; b < band_spec.n_bands; ++b)
			fm(f, b) = e[static_cast<std::size_t>(b)];
	}
	return fm;
}


// ---------------------------------------------------------------------------
// feature -> injected current
// ---------------------------------------------------------------------------

// Affine map of the training-corpus feature range onto [i_min, i_max];
// values outside the fitted range are clamped.
struct CurrentScaler {
	double i_min = 0.0;
	double i_max = 250.0;
	double feature_min = 0.0;
	double feature_max = 1.0;

	static CurrentScaler fit(std::span<const FeatureMatrix> training, double i_min = 0.0, double i_max = 250.0)
	{
		if (!(i_min < i_max))
			throw config_error("current scaler: i_min must be below i_max");
		if (training.empty())
			throw degenerate_error("current scaler: no training features");
		CurrentScaler s;
		s.i_min = i_min;
		s.i_max = i_max;
		s.feature_min = std::numeric_limits<double>::infinity();
		s.feature_max = -std::numeric_limits<double>::infinity();
		for (const auto &fm : training)
			for (double v : fm.values) {
				s.feature_min = std::min(s.feature_min, v);
				s.feature_max = std::max(s.feature_max, v);
			}
		if (!(s.feature_max > s.feature_min))
			throw degenerate_error("current scaler: training features have zero range");
		return s;
	}

	double operator()(double feature) const
	{
		const double u = std::clamp((feature - feature_min) / (feature_max - feature_min), 0.0, 1.0);
		return i_min + u * (i_max - i_min);
	}
};

inline FeatureMatrix scale_to_current(const FeatureMatrix &f, const CurrentScaler &scaler)
{
	FeatureMatrix out = f;
	for (double &v : out.values)
		v = scaler(v);
	return out;
}


// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

// `i_min i_max feature_min feature_max`, round-trip exact.
inline std::string format_scaler(const CurrentScaler &s)
{
	char buf[128];
	std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", s.i_min, s.i_max, s.feature_min, s.feature_max);
	return buf;
}

inline CurrentScaler parse_scaler(const std::string &text)
{
	std::istringstream in(text);
	CurrentScaler s;
	std::string extra;
	if (!(in >> s.i_min >> s.i_max >> s.feature_min >> s.feature_max) || (in >> extra))
		throw format_error("scaler: expected 'i_min i_max feature_min feature_max'");
	if (!(s.i_min < s.i_max) || !(s.feature_min < s.feature_max))
		throw format_error("scaler: empty range");
	return s;
}

inline void write_scaler(const CurrentScaler &s, const std::filesystem::path &path)
{
	std::ofstream out(path);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	out << format_scaler(s);
}

inline CurrentScaler read_scaler(const std::filesystem::path &path)
{
	std::ifstream in(path);
	if (!in)
		throw io_error("cannot open '" + path.string() + "'");
	std::ostringstream buf;
	buf << in.rdbuf();
	return parse_scaler(buf.str());
}

inline std::string format_feature_csv(const FeatureMatrix &f)
{
	std::string out;
	char buf[32];
	for (int r = 0; r < f.rows; ++r) {
		for (int c = 0; c < f.cols; ++c) {
			std::snprintf(buf, sizeof buf, "%.9g", f(r, c));
			if (c)
				out += ',';
			out += buf;
		}
		out += '\n';
	}
	return out;
}

inline void write_feature_csv(const FeatureMatrix &f, const std::filesystem::path &path)
{
	std::ofstream out(path);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	out << format_feature_csv(f);
}

// Binary 8-bit PGM: columns are frames, rows are frequency bins with the
// highest frequency on top. Intensity is min/max normalized log power.
inline void write_spectrogram_pgm(const AudioClip &clip, const FrameSpec &spec, const std::filesystem::path &path)
{
	const auto frames = frame_clip(clip, spec);
	std::vector<std::vector<double>> cols;
	double lo = std::numeric_limits<double>::infinity(), hi = -lo;
	for (const auto &fr : frames) {
		cols.push_back(frame_spectrum(fr));
		for (double v : cols.back()) {
			lo = std::min(lo, v);
			hi = std::max(hi, v);
		}
	}
	const std::size_t width = cols.size(), height = cols.front().size();
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	out << "P5\n" << width << ' ' << height << "\n255\n";
	const double span = hi > lo ? hi - lo : 1.0;
	for (std::size_t row = 0; row < height; ++row) {
		const std::size_t bin = height - 1 - row;
		for (std::size_t c = 0; c < width; ++c) {
			const double u = (cols[c][bin] - lo) / span;
			out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u))));
		}
	}
}

} // namespace spikesig
