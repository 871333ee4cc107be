#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spikesig/errors.hpp"
#include "spikesig/izhikevich.hpp"
#include "spikesig/signatures.hpp"

namespace spikesig {

// ---------------------------------------------------------------------------
// Victor-Purpura spike-time distance
// ---------------------------------------------------------------------------

// Minimum cost of turning `a` into `b` with unit-cost insertions/deletions
// and shifts costing q per ms. O(|a| |b|) time, O(|b|) memory.
inline double vp_distance(std::span<const double> a, std::span<const double> b, double q)
{
	if (!(q >= 0.0))
		throw config_error("vp_distance: q must be non-negative");
	std::vector<double> prev(b.size() + 1), cur(b.size() + 1);
	for (std::size_t j = 0; j <= b.size(); ++j)
		prev[j] = static_cast<double>(j);
	for (std::size_t i = 1; i <= a.size(); ++i) {
		cur[0] = static_cast<double>(i);
		for (std::size_t j = 1; j <= b.size(); ++j) {
			const double shift = prev[j - 1] + q * std::abs(a[i - 1] - b[j - 1]);
			cur[j] = std::min({prev[j] + 1.0, cur[j - 1] + 1.0, shift});
		}
		std::swap(prev, cur);
	}
	return prev[b.size()];
}

inline double vp_distance(const SpikeTrain &a, const SpikeTrain &b, double q)
{
	return vp_distance(std::span<const double>(a.times), std::span<const double>(b.times), q);
}

// Sum of per-unit distances between two full signatures.
inline double signature_distance(const Signature &a, const Signature &b, double q)
{
	if (a.trains.size() != b.trains.size())
		throw input_error("signature_distance: unit counts differ");
	double d = 0.0;
	for (std::size_t u = 0; u < a.trains.size(); ++u)
		d += vp_distance(a.trains[u], b.trains[u], q);
	return d;
}

// Compares unit c of the test signature with unit c of prototype c and
// returns the class with the smallest distance (lowest index on ties).
inline int prototype_classify(const Signature &sig, const PrototypeSet &protos, double q)
{
	int best = 0;
	double best_d = std::numeric_limits<double>::infinity();
	for (std::size_t c = 0; c < protos.prototypes.size(); ++c) {
		const double d = vp_distance(sig.trains.at(c), protos.prototypes[c].trains.at(c), q);
		if (d < best_d) {
			best_d = d;
			best = static_cast<int>(c);
		}
	}
	return best;
}

// Table of vp_distance(prototype c unit c, test column unit c) averaged over
// the test signatures of each class. Rows: prototypes, columns: test class.
inline std::vector<std::vector<double>> prototype_distance_table(const PrototypeSet &protos,
                                                                 std::span<const Signature> tests, double q)
{
	const std::size_t n = protos.prototypes.size();
	std::vector<std::vector<double>> sum(n, std::vector<double>(n, 0.0));
	std::vector<int> count(n, 0);
	for (const auto &t : tests) {
		if (!t.label || *t.label < 0 || static_cast<std::size_t>(*t.label) >= n)
			throw input_error("distance table: test signature '" + t.id + "' has no valid label");
		const auto col = static_cast<std::size_t>(*t.label);
		++count[col];
		for (std::size_t r = 0; r < n; ++r)
			sum[r][col] += vp_distance(protos.prototypes[r].trains.at(r), t.trains.at(r), q);
	}
	for (std::size_t r = 0; r < n; ++r)
		for (std::size_t c = 0; c < n; ++c)
			sum[r][c] = count[c] ? sum[r][c] / count[c] : std::numeric_limits<double>::quiet_NaN();
	return sum;
}

inline std::string format_distance_csv(const std::vector<std::vector<double>> &table)
{
	std::string out = "prototype\\test";
	for (std::size_t c = 0; c < table.size(); ++c)
		out += "," + std::to_string(c);
	out += '\n';
	char buf[32];
	for (std::size_t r = 0; r < table.size(); ++r) {
		out += std::to_string(r);
		for (double v : table[r]) {
			std::snprintf(buf, sizeof buf, ",%.6g", v);
			out += buf;
		}
		out += '\n';
	}
	return out;
}


// ---------------------------------------------------------------------------
// net-input features
// ---------------------------------------------------------------------------

// Mean net input per unit per bin, flattened unit-major (unit 0 bins first).
inline std::vector<double> net_input_features(const Signature &sig, double bin_ms = 5.0)
{
	if (sig.net_input.empty() || sig.net_input.front().empty())
		throw input_error("net_input_features: signature '" + sig.id + "' has no net-input trace");
	const std::size_t per_bin = steps_for(bin_ms, sig.dt);
	const std::size_t n_steps = sig.net_input.front().size();
	if (n_steps % per_bin != 0)
		throw input_error("net_input_features: trace length is not a whole number of bins");
	const std::size_t n_bins = n_steps / per_bin;
	std::vector<double> out;
	out.reserve(sig.net_input.size() * n_bins);
	for (const auto &trace : sig.net_input) {
		if (trace.size() != n_steps)
			throw input_error("net_input_features: ragged net-input traces");
		for (std::size_t b = 0; b < n_bins; ++b) {
			double s = 0.0;
			for (std::size_t i = 0; i < per_bin; ++i)
				s += trace[b * per_bin + i];
			out.push_back(s / static_cast<double>(per_bin));
		}
	}
	return out;
}


// ---------------------------------------------------------------------------
// linear one-vs-rest SVM
// ---------------------------------------------------------------------------

struct LabeledVector {
	std::vector<double> x;
	int label = 0;
};

enum class SvmMode { joint, per_unit };

struct SvmConfig {
	double c = 1.0;          // inverse regularization strength on the mean hinge loss
	int iterations = 600;    // full-batch subgradient steps
	bool standardize = true; // z-score each dimension on the training split
	SvmMode mode = SvmMode::joint;
	int n_units = 10;        // slices for SvmMode::per_unit

	void validate() const
	{
		if (!(c > 0.0))
			throw config_error("svm: C must be positive");
		if (iterations < 1)
			throw config_error("svm: iterations must be >= 1");
		if (n_units < 1)
			throw config_error("svm: n_units must be >= 1");
	}
};

// Per class c: score_c(x) = w_c . z(x) + b_c where z standardizes x.
struct LinearOvr {
	int n_classes = 0;
	int dim = 0;
	std::vector<double> mean, inv_scale;
	std::vector<double> w; // n_classes x dim
	std::vector<double> b;

	std::vector<double> scores(std::span<const double> x) const
	{
		std::vector<double> z(static_cast<std::size_t>(dim));
		for (int d = 0; d < dim; ++d)
			z[static_cast<std::size_t>(d)] = (x[static_cast<std::size_t>(d)] - mean[static_cast<std::size_t>(d)]) *
			                                 inv_scale[static_cast<std::size_t>(d)];
		std::vector<double> s(static_cast<std::size_t>(n_classes));
		for (int c = 0; c < n_classes; ++c) {
			double acc = b[static_cast<std::size_t>(c)];
			const double *wc = &w[static_cast<std::size_t>(c) * dim];
			for (int d = 0; d < dim; ++d)
				acc += wc[d] * z[static_cast<std::size_t>(d)];
			s[static_cast<std::size_t>(c)] = acc;
		}
		return s;
	}
};

namespace detail {

// Minimizes (1/(2C)) |w|^2 + mean_i max(0, 1 - y_i (w . z_i + b)) for every
// class at once with full-batch subgradient steps of size C / t; the bias is
// unregularized. The returned weights average the second half of the
// iterates, which damps the oscillation of plain subgradient descent.
inline LinearOvr fit_ovr(std::span<const std::vector<double>> xs, std::span<const int> labels, int n_classes,
                         const SvmConfig &cfg)
{
	const std::size_t n = xs.size();
	const int dim = static_cast<int>(xs.front().size());
	LinearOvr m;
	m.n_classes = n_classes;
	m.dim = dim;
	m.mean.assign(static_cast<std::size_t>(dim), 0.0);
	m.inv_scale.assign(static_cast<std::size_t>(dim), 1.0);
	if (cfg.standardize) {
		for (const auto &x : xs)
			for (int d = 0; d < dim; ++d)
				m.mean[static_cast<std::size_t>(d)] += x[static_cast<std::size_t>(d)];
		for (double &v : m.mean)
			v /= static_cast<double>(n);
		std::vector<double> var(static_cast<std::size_t>(dim), 0.0);
		for (const auto &x : xs)
			for (int d = 0; d < dim; ++d) {
				const double e = x[static_cast<std::size_t>(d)] - m.mean[static_cast<std::size_t>(d)];
				var[static_cast<std::size_t>(d)] += e * e;
			}
		for (int d = 0; d < dim; ++d) {
			const double sd = std::sqrt(var[static_cast<std::size_t>(d)] / static_cast<double>(n));
			m.inv_scale[static_cast<std::size_t>(d)] = sd > 1e-12 ? 1.0 / sd : 0.0;
		}
	}
	std::vector<double> z(n * static_cast<std::size_t>(dim));
	for (std::size_t i = 0; i < n; ++i)
		for (int d = 0; d < dim; ++d)
			z[i * dim + d] = (xs[i][static_cast<std::size_t>(d)] - m.mean[static_cast<std::size_t>(d)]) *
			                 m.inv_scale[static_cast<std::size_t>(d)];

	const double lambda = 1.0 / cfg.c;
	const std::size_t wsize = static_cast<std::size_t>(n_classes) * dim;
	std::vector<double> w(wsize, 0.0), b(static_cast<std::size_t>(n_classes), 0.0);
	std::vector<double> w_avg(wsize, 0.0), b_avg(static_cast<std::size_t>(n_classes), 0.0);
	std::vector<double> gw(wsize), gb(static_cast<std::size_t>(n_classes));
	const int avg_from = cfg.iterations / 2 + 1;
	int n_avg = 0;

	for (int t = 1; t <= cfg.iterations; ++t) {
		std::fill(gw.begin(), gw.end(), 0.0);
		std::fill(gb.begin(), gb.end(), 0.0);
		for (std::size_t i = 0; i < n; ++i) {
			const double *zi = &z[i * dim];
			for (int c = 0; c < n_classes; ++c) {
				const double y = labels[i] == c ? 1.0 : -1.0;
				const double *wc = &w[static_cast<std::size_t>(c) * dim];
				double s = b[static_cast<std::size_t>(c)];
				for (int d = 0; d < dim; ++d)
					s += wc[d] * zi[d];
				if (y * s < 1.0) {
					double *g = &gw[static_cast<std::size_t>(c) * dim];
					for (int d = 0; d < dim; ++d)
						g[d] += y * zi[d];
					gb[static_cast<std::size_t>(c)] += y;
				}
			}
		}
		const double eta = 1.0 / (lambda * t);
		const double shrink = 1.0 - eta * lambda;
		const double step = eta / static_cast<double>(n);
		for (std::size_t q = 0; q < wsize; ++q)
			w[q] = shrink * w[q] + step * gw[q];
		for (int c = 0; c < n_classes; ++c)
			b[static_cast<std::size_t>(c)] += step * gb[static_cast<std::size_t>(c)];
		if (t >= avg_from) {
			++n_avg;
			for (std::size_t q = 0; q < wsize; ++q)
				w_avg[q] += (w[q] - w_avg[q]) / n_avg;
			for (int c = 0; c < n_classes; ++c)
				b_avg[static_cast<std::size_t>(c)] += (b[static_cast<std::size_t>(c)] - b_avg[static_cast<std::size_t>(c)]) / n_avg;
		}
	}
	m.w = std::move(w_avg);
	m.b = std::move(b_avg);
	return m;
}

} // namespace detail

// Joint mode: one model over the full vector. Per-unit mode: one model per
// contiguous slice of dim / n_units values; the class scores are summed.
struct SvmModel {
	SvmMode mode = SvmMode::joint;
	int n_classes = 0;
	std::vector<LinearOvr> parts;

	std::vector<double> scores(std::span<const double> x) const
	{
		std::vector<double> total(static_cast<std::size_t>(n_classes), 0.0);
		std::size_t offset = 0;
		for (const auto &p : parts) {
			if (offset + static_cast<std::size_t>(p.dim) > x.size())
				throw input_error("svm: feature vector too short");
			const auto s = p.scores(x.subspan(offset, static_cast<std::size_t>(p.dim)));
			for (int c = 0; c < n_classes; ++c)
				total[static_cast<std::size_t>(c)] += s[static_cast<std::size_t>(c)];
			offset += static_cast<std::size_t>(p.dim);
		}
		if (offset != x.size())
			throw input_error("svm: feature vector length mismatch");
		return total;
	}

	int predict(std::span<const double> x) const
	{
		const auto s = scores(x);
		return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
	}
};

inline SvmModel svm_train(std::span<const LabeledVector> data, const SvmConfig &cfg)
{
	cfg.validate();
	if (data.empty())
		throw input_error("svm_train: no training data");
	const std::size_t dim = data.front().x.size();
	int max_label = 0;
	std::vector<int> seen;
	for (const auto &d : data) {
		if (d.x.size() != dim)
			throw input_error("svm_train: ragged feature vectors");
		if (d.label < 0)
			throw input_error("svm_train: negative label");
		for (double v : d.x)
			if (!std::isfinite(v))
				throw numeric_error("svm_train: non-finite feature");
		max_label = std::max(max_label, d.label);
		if (std::find(seen.begin(), seen.end(), d.label) == seen.end())
			seen.push_back(d.label);
	}
	if (seen.size() < 2)
		throw input_error("svm_train: need at least two classes");

	SvmModel model;
	model.mode = cfg.mode;
	model.n_classes = max_label + 1;
	std::vector<int> labels;
	for (const auto &d : data)
		labels.push_back(d.label);

	const int n_parts = cfg.mode == SvmMode::joint ? 1 : cfg.n_units;
	if (dim % static_cast<std::size_t>(n_parts) != 0)
		throw input_error("svm_train: feature length is not divisible by the unit count");
	const std::size_t slice = dim / static_cast<std::size_t>(n_parts);
	for (int p = 0; p < n_parts; ++p) {
		std::vector<std::vector<double>> xs;
		xs.reserve(data.size());
		for (const auto &d : data)
			xs.emplace_back(d.x.begin() + static_cast<std::ptrdiff_t>(p * slice),
			                d.x.begin() + static_cast<std::ptrdiff_t>((p + 1) * slice));
		model.parts.push_back(detail::fit_ovr(xs, labels, model.n_classes, cfg));
	}
	return model;
}


// ---------------------------------------------------------------------------
// confusion matrix
// ---------------------------------------------------------------------------

// counts(desired, recognized). Hit ratio is per row, miss rate per column.
struct ConfusionMatrix {
	int n = 10;
	std::vector<long> counts;

	explicit ConfusionMatrix(int n_classes = 10)
		: n(n_classes), counts(static_cast<std::size_t>(n_classes) * n_classes, 0) {}

	long &operator()(int desired, int recognized) { return counts[static_cast<std::size_t>(desired) * n + recognized]; }
	long operator()(int desired, int recognized) const
	{
		return counts[static_cast<std::size_t>(desired) * n + recognized];
	}

	void add(int desired, int recognized) { ++(*this)(desired, recognized); }

	long row_total(int c) const
	{
		long s = 0;
		for (int j = 0; j < n; ++j)
			s += (*this)(c, j);
		return s;
	}
	long column_total(int c) const
	{
		long s = 0;
		for (int i = 0; i < n; ++i)
			s += (*this)(i, c);
		return s;
	}
	long total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }
	long trace() const
	{
		long s = 0;
		for (int c = 0; c < n; ++c)
			s += (*this)(c, c);
		return s;
	}

	double hit_ratio(int c) const
	{
		const long r = row_total(c);
		return r ? static_cast<double>((*this)(c, c)) / r : 0.0;
	}
	// Fraction of detections of class c that were wrong.
	double miss_rate(int c) const
	{
		const long col = column_total(c);
		return col ? 1.0 - static_cast<double>((*this)(c, c)) / col : 0.0;
	}
	double overall_accuracy() const
	{
		const long t = total();
		return t ? static_cast<double>(trace()) / t : 0.0;
	}
	double average_hit_ratio() const
	{
		double s = 0.0;
		for (int c = 0; c < n; ++c)
			s += hit_ratio(c);
		return s / n;
	}
	double average_miss_rate() const
	{
		double s = 0.0;
		for (int c = 0; c < n; ++c)
			s += miss_rate(c);
		return s / n;
	}
};

inline ConfusionMatrix evaluate(const SvmModel &model, std::span<const LabeledVector> test)
{
	ConfusionMatrix cm(model.n_classes);
	for (const auto &t : test) {
		if (t.label < 0 || t.label >= model.n_classes)
			throw input_error("evaluate: label out of range");
		cm.add(t.label, model.predict(t.x));
	}
	return cm;
}

// Rows in `order` (defaults to 0..n-1), then column totals, miss-rate row and
// the diagonal total in the bottom-right cell. Rates are percentages.
inline std::string format_confusion_csv(const ConfusionMatrix &cm, std::vector<int> order = {})
{
	if (order.empty()) {
		order.resize(static_cast<std::size_t>(cm.n));
		std::iota(order.begin(), order.end(), 0);
	}
	char buf[32];
	std::string out = "desired\\recognized";
	for (int c : order)
		out += "," + std::to_string(c);
	out += ",row_total,hit_rate_pct\n";
	for (int r : order) {
		out += std::to_string(r);
		for (int c : order)
			out += "," + std::to_string(cm(r, c));
		std::snprintf(buf, sizeof buf, ",%ld,%.1f\n", cm.row_total(r), 100.0 * cm.hit_ratio(r));
		out += buf;
	}
	out += "column_total";
	for (int c : order)
		out += "," + std::to_string(cm.column_total(c));
	out += "," + std::to_string(cm.total()) + ",\n";
	out += "miss_rate_pct";
	for (int c : order) {
		std::snprintf(buf, sizeof buf, ",%.1f", 100.0 * cm.miss_rate(c));
		out += buf;
	}
	out += ",," + std::to_string(cm.trace()) + "\n";
	return out;
}

} // namespace spikesig
