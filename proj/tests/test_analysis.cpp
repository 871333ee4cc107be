#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "reference_confusion.hpp"
#include "spikesig/analysis.hpp"

using namespace spikesig;

namespace {

// Every partial matching of a onto b, crossing or not: unmatched spikes cost
// 1 each, matched pairs cost q |dt|.
double vp_exhaustive(const std::vector<double> &a, const std::vector<double> &b, double q, std::size_t i = 0,
                     std::vector<char> *used = nullptr)
{
	std::vector<char> local(b.size(), 0);
	if (!used)
		used = &local;
	if (i == a.size()) {
		double open = 0;
		for (char u : *used)
			open += u ? 0 : 1;
		return open;
	}
	double best = 1.0 + vp_exhaustive(a, b, q, i + 1, used);
	for (std::size_t j = 0; j < b.size(); ++j)
		if (!(*used)[j]) {
			(*used)[j] = 1;
			best = std::min(best, q * std::abs(a[i] - b[j]) + vp_exhaustive(a, b, q, i + 1, used));
			(*used)[j] = 0;
		}
	return best;
}

// Sorted, distinct multiples of 1/8 ms so all costs are exact.
std::vector<double> dyadic_train(std::mt19937_64 &rng, int max_n)
{
	std::uniform_int_distribution<int> count(0, max_n), tick(0, 1600);
	std::vector<double> t;
	const int n = count(rng);
	while (static_cast<int>(t.size()) < n) {
		const double v = tick(rng) / 8.0;
		if (std::find(t.begin(), t.end(), v) == t.end())
			t.push_back(v);
	}
	std::sort(t.begin(), t.end());
	return t;
}

Signature make_signature(std::vector<std::vector<double>> times, int label = 0)
{
	Signature s;
	for (auto &t : times)
		s.trains.push_back(SpikeTrain{std::move(t), 200.0});
	s.label = label;
	return s;
}

std::vector<LabeledVector> blobs(std::mt19937_64 &rng, int per_class, int n_classes, int dim, double spread)
{
	std::normal_distribution<double> noise(0.0, spread);
	std::vector<LabeledVector> out;
	for (int c = 0; c < n_classes; ++c)
		for (int i = 0; i < per_class; ++i) {
			LabeledVector v;
			v.label = c;
			v.x.assign(static_cast<std::size_t>(dim), 0.0);
			for (int d = 0; d < dim; ++d)
				v.x[static_cast<std::size_t>(d)] = (d % n_classes == c ? 3.0 : 0.0) + noise(rng);
			out.push_back(v);
		}
	return out;
}

double accuracy(const SvmModel &m, const std::vector<LabeledVector> &data)
{
	return evaluate(m, data).overall_accuracy();
}

} // namespace

TEST(VictorPurpura, SmallCases)
{
	const std::vector<double> none, three{1.0, 2.0, 3.0};
	EXPECT_EQ(vp_distance(none, none, 0.1), 0.0);
	EXPECT_EQ(vp_distance(three, three, 0.1), 0.0);
	EXPECT_EQ(vp_distance(none, three, 0.1), 3.0);
	EXPECT_EQ(vp_distance(three, none, 0.1), 3.0);
	for (double dt : {0.5, 4.0, 19.0, 25.0})
		for (double q : {0.05, 0.1, 1.0}) {
			const std::vector<double> a{10.0}, b{10.0 + dt};
			EXPECT_DOUBLE_EQ(vp_distance(a, b, q), std::min(2.0, q * dt));
		}
	EXPECT_THROW(vp_distance(none, none, -1.0), config_error);
}

TEST(VictorPurpura, MatchesExhaustiveSearch)
{
	std::mt19937_64 rng(1);
	for (int trial = 0; trial < 300; ++trial) {
		const auto a = dyadic_train(rng, 6), b = dyadic_train(rng, 6);
		for (double q : {0.0, 0.125, 0.5, 2.0})
			ASSERT_EQ(vp_distance(a, b, q), vp_exhaustive(a, b, q)) << "trial " << trial << " q " << q;
	}
}

TEST(VictorPurpura, MetricAxioms)
{
	std::mt19937_64 rng(2);
	for (int trial = 0; trial < 300; ++trial) {
		const auto a = dyadic_train(rng, 8), b = dyadic_train(rng, 8), c = dyadic_train(rng, 8);
		const double q = 0.25;
		EXPECT_GE(vp_distance(a, b, q), 0.0);
		EXPECT_EQ(vp_distance(a, b, q), vp_distance(b, a, q));
		EXPECT_LE(vp_distance(a, c, q), vp_distance(a, b, q) + vp_distance(b, c, q));
		EXPECT_EQ(vp_distance(a, a, q), 0.0);
		if (a != b)
			EXPECT_GT(vp_distance(a, b, q), 0.0);
	}
}

TEST(VictorPurpura, LimitsInQ)
{
	std::mt19937_64 rng(3);
	for (int trial = 0; trial < 100; ++trial) {
		const auto a = dyadic_train(rng, 8), b = dyadic_train(rng, 8);
		// q = 0: only the counts matter
		EXPECT_EQ(vp_distance(a, b, 0.0), std::abs(double(a.size()) - double(b.size())));
		// very large q: shifting never pays, only exact coincidences match
		std::size_t common = 0;
		for (double t : a)
			common += std::count(b.begin(), b.end(), t);
		EXPECT_EQ(vp_distance(a, b, 1e9), double(a.size() + b.size() - 2 * common));
	}
}

TEST(SignatureDistance, SumsUnits)
{
	const auto a = make_signature({{1.0}, {}, {5.0, 6.0}});
	const auto b = make_signature({{2.0}, {3.0}, {5.0}});
	EXPECT_DOUBLE_EQ(signature_distance(a, b, 0.5), 0.5 + 1.0 + 1.0);
	EXPECT_THROW(signature_distance(a, make_signature({{}}), 0.5), input_error);
}

TEST(PrototypeClassifier, SelfAndTies)
{
	PrototypeSet set;
	for (int c = 0; c < 3; ++c) {
		std::vector<std::vector<double>> t(3);
		t[c] = {10.0 * (c + 1), 50.0};
		set.prototypes.push_back(make_signature(t, c));
	}
	for (int c = 0; c < 3; ++c)
		EXPECT_EQ(prototype_classify(set.prototypes[c], set, 0.1), c);
	// all distances equal, lowest class index wins
	const auto silent = make_signature({{}, {}, {}});
	EXPECT_EQ(prototype_classify(silent, set, 0.1), 0);
}

TEST(DistanceTable, LayoutAndMeans)
{
	PrototypeSet set;
	set.prototypes = {make_signature({{1.0}, {}}, 0), make_signature({{}, {2.0}}, 1)};
	std::vector<Signature> tests{make_signature({{1.0}, {}}, 0), make_signature({{}, {}}, 0),
	                             make_signature({{}, {2.0}}, 1)};
	const auto t = prototype_distance_table(set, tests, 0.1);
	EXPECT_DOUBLE_EQ(t[0][0], 0.5); // (0 + 1) / 2
	EXPECT_DOUBLE_EQ(t[1][0], 1.0); // class 0 tests are silent on unit 1
	EXPECT_DOUBLE_EQ(t[0][1], 1.0);
	EXPECT_DOUBLE_EQ(t[1][1], 0.0);

	std::vector<std::vector<double>> ten(10, std::vector<double>(10, 1.5));
	const auto csv = format_distance_csv(ten);
	EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
	EXPECT_EQ(csv.substr(0, csv.find('\n')), "prototype\\test,0,1,2,3,4,5,6,7,8,9");
	EXPECT_EQ(std::count(csv.begin(), csv.end(), ','), 110);
	tests[0].label.reset();
	EXPECT_THROW(prototype_distance_table(set, tests, 0.1), input_error);
}

TEST(NetInput, BinMeans)
{
	std::mt19937_64 rng(4);
	std::uniform_real_distribution<double> u(-5.0, 5.0);
	Signature s;
	s.net_input.assign(3, std::vector<double>(2000));
	for (auto &trace : s.net_input)
		for (double &v : trace)
			v = u(rng);
	const auto f = net_input_features(s);
	ASSERT_EQ(f.size(), 3u * 40);
	for (int unit = 0; unit < 3; ++unit)
		for (int bin = 0; bin < 40; ++bin) {
			double sum = 0.0;
			for (int i = 0; i < 50; ++i)
				sum += s.net_input[unit][bin * 50 + i];
			EXPECT_NEAR(f[unit * 40 + bin], sum / 50, 1e-12);
		}

	for (auto &trace : s.net_input)
		std::fill(trace.begin(), trace.end(), 2.5);
	for (double v : net_input_features(s))
		EXPECT_DOUBLE_EQ(v, 2.5);

	Signature missing;
	EXPECT_THROW(net_input_features(missing), input_error);
	s.net_input[1].pop_back();
	EXPECT_THROW(net_input_features(s), input_error);
}

TEST(Svm, SeparableBlobs)
{
	std::mt19937_64 rng(5);
	const auto train = blobs(rng, 30, 4, 8, 0.3), test = blobs(rng, 30, 4, 8, 0.3);
	for (auto mode : {SvmMode::joint, SvmMode::per_unit}) {
		SvmConfig cfg;
		cfg.mode = mode;
		cfg.n_units = 2;
		const auto m = svm_train(train, cfg);
		EXPECT_EQ(accuracy(m, train), 1.0);
		EXPECT_EQ(accuracy(m, test), 1.0);
	}
}

TEST(Svm, DuplicatedDataGivesSameModel)
{
	std::mt19937_64 rng(6);
	const auto train = blobs(rng, 20, 3, 6, 1.5);
	auto twice = train;
	twice.insert(twice.end(), train.begin(), train.end());
	const SvmConfig cfg;
	const auto a = svm_train(train, cfg), b = svm_train(twice, cfg);
	for (std::size_t q = 0; q < a.parts[0].w.size(); ++q)
		EXPECT_NEAR(a.parts[0].w[q], b.parts[0].w[q], 1e-6);
	for (std::size_t c = 0; c < a.parts[0].b.size(); ++c)
		EXPECT_NEAR(a.parts[0].b[c], b.parts[0].b[c], 1e-6);
}

// Without standardization, doubling every feature while dividing C by 4
// leaves the optimum's decision function unchanged (w halves, b stays). The
// solver only approaches the optimum, so compare the decisions.
TEST(Svm, ScaleCovariance)
{
	std::mt19937_64 rng(7);
	const auto train = blobs(rng, 20, 3, 6, 1.5);
	auto doubled = train;
	for (auto &v : doubled)
		for (double &x : v.x)
			x *= 2.0;
	SvmConfig cfg;
	cfg.standardize = false;
	cfg.c = 0.5;
	cfg.iterations = 4000;
	SvmConfig cfg2 = cfg;
	cfg2.c = cfg.c / 4.0;
	const auto a = svm_train(train, cfg), b = svm_train(doubled, cfg2);
	int agree = 0;
	for (std::size_t i = 0; i < train.size(); ++i)
		agree += a.predict(train[i].x) == b.predict(doubled[i].x);
	EXPECT_GE(agree, static_cast<int>(train.size()) - 1);
	for (std::size_t q = 0; q < a.parts[0].w.size(); ++q)
		EXPECT_NEAR(b.parts[0].w[q], a.parts[0].w[q] / 2.0, 0.05);
}

TEST(Svm, InputChecks)
{
	std::vector<LabeledVector> one_class{{{1.0, 2.0}, 3}, {{2.0, 1.0}, 3}};
	EXPECT_THROW(svm_train(one_class, SvmConfig{}), input_error);
	EXPECT_THROW(svm_train(std::vector<LabeledVector>{}, SvmConfig{}), input_error);
	std::vector<LabeledVector> ragged{{{1.0, 2.0}, 0}, {{2.0}, 1}};
	EXPECT_THROW(svm_train(ragged, SvmConfig{}), input_error);
	std::vector<LabeledVector> bad{{{1.0, std::nan("")}, 0}, {{2.0, 1.0}, 1}};
	EXPECT_THROW(svm_train(bad, SvmConfig{}), numeric_error);
	SvmConfig cfg;
	cfg.c = 0.0;
	EXPECT_THROW(cfg.validate(), config_error);
	std::vector<LabeledVector> ok{{{1.0, 2.0, 3.0}, 0}, {{2.0, 1.0, 0.0}, 1}};
	cfg = {};
	cfg.mode = SvmMode::per_unit;
	cfg.n_units = 2;
	EXPECT_THROW(svm_train(ok, cfg), input_error);
}

TEST(Confusion, PerfectAndConstantPredictors)
{
	ConfusionMatrix perfect(10), constant(10);
	for (int c = 0; c < 10; ++c)
		for (int i = 0; i < 5; ++i) {
			perfect.add(c, c);
			constant.add(c, 3);
		}
	EXPECT_EQ(perfect.overall_accuracy(), 1.0);
	EXPECT_EQ(perfect.average_hit_ratio(), 1.0);
	EXPECT_EQ(perfect.average_miss_rate(), 0.0);
	EXPECT_DOUBLE_EQ(constant.overall_accuracy(), 0.1);
	EXPECT_EQ(constant.hit_ratio(3), 1.0);
	EXPECT_EQ(constant.hit_ratio(4), 0.0);
	EXPECT_DOUBLE_EQ(constant.miss_rate(3), 0.9);
	EXPECT_EQ(constant.miss_rate(4), 0.0); // never detected
}

TEST(Confusion, EvaluateCountsEverySample)
{
	std::mt19937_64 rng(8);
	const auto train = blobs(rng, 10, 3, 4, 0.5);
	const auto m = svm_train(train, SvmConfig{});
	const auto cm = evaluate(m, train);
	EXPECT_EQ(cm.total(), 30);
	for (int c = 0; c < 3; ++c)
		EXPECT_EQ(cm.row_total(c), 10);
	std::vector<LabeledVector> out_of_range{{train[0].x, 7}};
	EXPECT_THROW(evaluate(m, out_of_range), input_error);
}

TEST(ReferenceTable, CleanMarginsReproduced)
{
	const auto &t = fixture::clean;
	const auto cm = fixture::to_matrix(t);
	EXPECT_EQ(cm.total(), 500);
	EXPECT_EQ(cm.trace(), t.diagonal);
	EXPECT_EQ(cm.trace(), 454);
	EXPECT_DOUBLE_EQ(100.0 * cm.overall_accuracy(), 90.8);
	EXPECT_NEAR(100.0 * cm.hit_ratio(1), 91.8, 0.05);
	for (int i = 0; i < 10; ++i) {
		const int d = fixture::digit_order[i];
		EXPECT_TRUE(fixture::matches_printed(100.0 * cm.hit_ratio(d), t.hit_pct[i])) << "digit " << d;
		EXPECT_TRUE(fixture::matches_printed(100.0 * cm.miss_rate(d), t.miss_pct[i])) << "digit " << d;
		EXPECT_EQ(cm.column_total(d), t.column_totals[i]);
	}
	EXPECT_TRUE(fixture::matches_printed(100.0 * cm.average_hit_ratio(), t.avg_hit_pct));
	EXPECT_TRUE(fixture::matches_printed(100.0 * cm.average_miss_rate(), t.avg_miss_pct));
}

TEST(ReferenceTable, NoisyMarginsReproduced)
{
	const auto &t = fixture::noisy;
	const auto cm = fixture::to_matrix(t);
	EXPECT_EQ(cm.total(), 500);
	EXPECT_EQ(cm.trace(), 351);
	EXPECT_DOUBLE_EQ(100.0 * cm.overall_accuracy(), t.overall_pct);
	for (int i = 0; i < 10; ++i) {
		const int d = fixture::digit_order[i];
		EXPECT_TRUE(fixture::matches_printed(100.0 * cm.hit_ratio(d), t.hit_pct[i])) << "digit " << d;
		EXPECT_TRUE(fixture::matches_printed(100.0 * cm.miss_rate(d), t.miss_pct[i])) << "digit " << d;
		EXPECT_EQ(cm.column_total(d), t.column_totals[i]);
	}
	EXPECT_TRUE(fixture::matches_printed(100.0 * cm.average_hit_ratio(), t.avg_hit_pct));
	EXPECT_TRUE(fixture::matches_printed(100.0 * cm.average_miss_rate(), t.avg_miss_pct));
}

TEST(ReferenceTable, CsvLayout)
{
	const auto cm = fixture::to_matrix(fixture::clean);
	const std::vector<int> order(fixture::digit_order.begin(), fixture::digit_order.end());
	const auto csv = format_confusion_csv(cm, order);
	std::vector<std::string> lines;
	std::size_t start = 0;
	for (auto p = csv.find('\n'); p != std::string::npos; start = p + 1, p = csv.find('\n', start))
		lines.push_back(csv.substr(start, p - start));
	ASSERT_EQ(lines.size(), 13u);
	EXPECT_EQ(lines[0], "desired\\recognized,1,2,3,4,5,6,7,8,9,0,row_total,hit_rate_pct");
	EXPECT_EQ(lines[1], "1,45,0,0,0,0,0,1,0,3,0,49,91.8");
	EXPECT_EQ(lines[5], "5,0,0,0,0,48,0,0,0,0,0,48,100.0");
	EXPECT_EQ(lines[11], "column_total,50,54,50,51,49,49,45,57,46,49,500,");
	EXPECT_EQ(lines[12], "miss_rate_pct,10.0,7.4,10.0,7.8,2.0,14.3,13.3,8.8,10.9,8.2,,454");
}
