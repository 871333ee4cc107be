// spikesig: command-line driver for the spoken-digit spike-signature pipeline.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <boost/version.hpp>
#include <fftw3.h>

#include "CLI11.hpp"
#include "spikesig/spikesig.hpp"

namespace fs = std::filesystem;
using namespace spikesig;

namespace {

struct Common {
	std::string config_path;
	std::vector<std::string> sets;
	std::optional<std::uint64_t> seed;
	std::optional<int> jobs;
	std::string corpus = "corpus";
	std::string run = "run";
};

void add_common(CLI::App *cmd, Common &c, bool wants_run)
{
	cmd->add_option("--config", c.config_path, "INI config file (default: <run>/config.ini when present)");
	cmd->add_option("--set", c.sets, "override one key, section.key=value (repeatable)");
	cmd->add_option("--seed", c.seed, "run seed (overrides run.seed)");
	cmd->add_option("--jobs", c.jobs, "worker threads (overrides run.jobs)");
	cmd->add_option("--corpus", c.corpus, "corpus directory")->capture_default_str();
	if (wants_run)
		cmd->add_option("--run", c.run, "run directory")->capture_default_str();
}

RunConfig resolve(const Common &c, bool use_run_config)
{
	RunConfig cfg;
	if (!c.config_path.empty())
		cfg = load_config(c.config_path);
	else if (use_run_config && fs::exists(fs::path(c.run) / "config.ini"))
		cfg = load_config(fs::path(c.run) / "config.ini");
	for (const auto &s : c.sets)
		apply_override(cfg, s);
	if (c.seed)
		apply_override(cfg, "run.seed=" + std::to_string(*c.seed));
	if (c.jobs)
		apply_override(cfg, "run.jobs=" + std::to_string(*c.jobs));
	cfg.validate();
	return cfg;
}

std::string header(const RunConfig &cfg)
{
	return "seed=" + std::to_string(cfg.seed) + " config=" + hex64(config_hash(cfg));
}

// run.meta accumulates one block per command invocation.
void append_meta(const fs::path &dir, const std::string &command, const RunConfig &cfg)
{
	fs::create_directories(dir);
	std::ofstream out(dir / "run.meta", std::ios::app);
	if (!out)
		throw io_error("cannot write '" + (dir / "run.meta").string() + "'");
	const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
	char stamp[32];
	std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
	out << "[" << command << "]\n"
	    << "time = " << stamp << "\n"
	    << "seed = " << cfg.seed << "\n"
	    << "config_hash = " << hex64(config_hash(cfg)) << "\n"
	    << "spikesig = " << version << "\n"
	    << "compiler = " << __VERSION__ << "\n"
	    << "fftw = " << fftw_version << "\n"
	    << "boost = " << BOOST_LIB_VERSION << "\n"
	    << "cli11 = " << CLI11_VERSION << "\n\n";
}

// manifest ids are relative paths; outputs are named by file stem
std::string stem_of(const std::string &id) { return fs::path(id).stem().string(); }

fs::path manifest_path(const Common &c, Split s) { return fs::path(c.corpus) / (std::string(split_name(s)) + ".csv"); }

Split split_arg(const std::string &name)
{
	const auto s = parse_split(name);
	if (!s)
		throw config_error("unknown split '" + name + "' (train, test-clean, test-noisy)");
	return *s;
}

std::vector<FeatureMatrix> extract(const std::vector<AudioClip> &clips, const RunConfig &cfg)
{
	std::vector<FeatureMatrix> out(clips.size());
	parallel_for(clips.size(), cfg.jobs, [&](std::size_t i) { out[i] = features(clips[i], cfg.frames, cfg.bands); });
	return out;
}

std::vector<FeatureMatrix> split_features(const Common &c, Split s, const RunConfig &cfg)
{
	return extract(load_manifest_clips(manifest_path(c, s)), cfg);
}

std::vector<Signature> make_signatures(const std::vector<FeatureMatrix> &fm, const SynapseMatrix &w,
                                       const CurrentScaler &sc, const RunConfig &cfg)
{
	std::vector<Signature> out(fm.size());
	parallel_for(fm.size(), cfg.jobs, [&](std::size_t i) { out[i] = signature(fm[i], w, sc, cfg.network); });
	return out;
}

struct Model {
	SynapseMatrix weights;
	CurrentScaler scaler;
};

Model load_model(const Common &c)
{
	const fs::path run(c.run);
	if (!fs::exists(run / "weights.txt"))
		throw input_error("no trained weights in '" + run.string() + "'; run `train` first");
	return {read_synapse_matrix(run / "weights.txt"), read_scaler(run / "scaler.txt")};
}

void write_with_header(const fs::path &path, const RunConfig &cfg, const std::string &body)
{
	std::ofstream out(path);
	if (!out)
		throw io_error("cannot write '" + path.string() + "'");
	out << "# " << header(cfg) << "\n" << body;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Common &c, bool force)
{
	const RunConfig cfg = resolve(c, false);
	const fs::path root(c.corpus);
	if (fs::exists(root) && !fs::is_empty(root) && !force)
		throw config_error("'" + root.string() + "' is not empty; pass --force to overwrite");
	const auto train_clips = synth_corpus(cfg.train_seed(), cfg.per_class, cfg.synth);
	const auto test_clips = synth_corpus(cfg.test_seed(), cfg.per_class, cfg.synth);
	std::vector<AudioClip> noisy;
	noisy.reserve(test_clips.size());
	for (std::size_t i = 0; i < test_clips.size(); ++i)
		noisy.push_back(add_noise(test_clips[i], cfg.snr_db,
		                          synth::clip_seed(cfg.noise_seed(), *test_clips[i].label, static_cast<int>(i))));

	auto emit = [&](const std::vector<AudioClip> &clips, Split s) {
		const std::string name = split_name(s);
		fs::create_directories(root / name);
		CorpusManifest m;
		m.split = s;
		for (const auto &clip : clips) {
			const std::string rel = name + "/" + clip.id + ".wav";
			write_wav(clip, root / rel);
			m.entries.push_back({rel, *clip.label});
		}
		write_manifest(m, manifest_path(c, s));
		std::printf("%-11s %zu clips\n", name.c_str(), clips.size());
	};
	std::printf("# %s\n", header(cfg).c_str());
	emit(train_clips, Split::train);
	emit(test_clips, Split::test_clean);
	emit(noisy, Split::test_noisy);
	append_meta(root, "synth", cfg);
	return 0;
}

int cmd_features(const Common &c, const std::string &split, bool spectrograms)
{
	const RunConfig cfg = resolve(c, true);
	std::vector<Split> splits;
	if (split == "all")
		splits = {Split::train, Split::test_clean, Split::test_noisy};
	else
		splits = {split_arg(split)};
	std::printf("# %s\n", header(cfg).c_str());
	for (Split s : splits) {
		const auto clips = load_manifest_clips(manifest_path(c, s));
		const auto fm = extract(clips, cfg);
		const fs::path dir = fs::path(c.run) / "features" / split_name(s);
		fs::create_directories(dir);
		for (std::size_t i = 0; i < fm.size(); ++i) {
			write_feature_csv(fm[i], dir / (stem_of(clips[i].id) + ".csv"));
			if (spectrograms)
				write_spectrogram_pgm(clips[i], cfg.frames, dir / (stem_of(clips[i].id) + ".pgm"));
		}
		std::printf("%-11s %zu feature grids -> %s\n", split_name(s), fm.size(), dir.string().c_str());
	}
	append_meta(c.run, "features", cfg);
	return 0;
}

int cmd_train(const Common &c)
{
	const RunConfig cfg = resolve(c, true);
	const fs::path run(c.run);
	fs::create_directories(run);
	const auto fm = split_features(c, Split::train, cfg);
	const auto scaler = CurrentScaler::fit(fm, cfg.i_min, cfg.i_max);
	std::vector<FeatureMatrix> currents;
	currents.reserve(fm.size());
	for (const auto &f : fm)
		currents.push_back(scale_to_current(f, scaler));

	std::printf("# %s\n", header(cfg).c_str());
	std::printf("training on %zu clips for %d epochs\n", currents.size(), cfg.network.epochs);
	std::fflush(stdout);
	const auto t0 = std::chrono::steady_clock::now();
	int last_epoch = 0;
	const auto result = train(currents, cfg.network, cfg.stdp, cfg.seed, [&](int epoch, std::size_t, const SynapseMatrix &) {
		if (epoch != last_epoch && epoch % 10 == 0) {
			const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
			std::fprintf(stderr, "epoch %d (%.0f s)\n", epoch, s);
			last_epoch = epoch;
		}
	});

	write_synapse_matrix(result.weights, run / "weights.txt");
	write_scaler(scaler, run / "scaler.txt");
	write_training_log_csv(result.log, run / "train_log.csv", header(cfg));
	{
		std::ofstream out(run / "config.ini");
		if (!out)
			throw io_error("cannot write '" + (run / "config.ini").string() + "'");
		out << format_config(cfg);
	}
	if (!result.log.empty()) {
		const auto &first = result.log.front(), &last = result.log.back();
		std::printf("mean |dK| epoch %d: %.4g, epoch %d: %.4g\n", first.epoch, first.mean_abs_dk, last.epoch,
		            last.mean_abs_dk);
	}
	std::printf("weights -> %s\n", (run / "weights.txt").string().c_str());
	append_meta(run, "train", cfg);
	return 0;
}

int cmd_signatures(const Common &c, const std::string &split, std::size_t limit)
{
	const RunConfig cfg = resolve(c, true);
	const Model m = load_model(c);
	const fs::path dir = fs::path(c.run) / "signatures";
	const auto protos = prototypes(split_features(c, Split::train, cfg), m.weights, m.scaler, cfg.network);
	export_prototypes(protos, dir / "prototypes");

	const Split s = split_arg(split);
	auto clips = load_manifest_clips(manifest_path(c, s));
	if (limit > 0 && clips.size() > limit)
		clips.resize(limit);
	const auto sigs = make_signatures(extract(clips, cfg), m.weights, m.scaler, cfg);
	const fs::path out = dir / split_name(s);
	fs::create_directories(out);
	for (const auto &sig : sigs)
		export_raster(sig, out / stem_of(sig.id));

	std::size_t proto_spikes = 0;
	for (const auto &p : protos.prototypes)
		proto_spikes += p.total_spikes();
	std::printf("# %s\n", header(cfg).c_str());
	std::printf("prototypes: %zu files, %zu spikes -> %s\n", protos.prototypes.size(), proto_spikes,
	            (dir / "prototypes").string().c_str());
	std::printf("%s: %zu signatures -> %s\n", split_name(s), sigs.size(), out.string().c_str());
	append_meta(c.run, "signatures", cfg);
	return 0;
}

int cmd_distance(const Common &c, const std::string &split)
{
	const RunConfig cfg = resolve(c, true);
	const Model m = load_model(c);
	const Split s = split_arg(split);
	const auto protos = prototypes(split_features(c, Split::train, cfg), m.weights, m.scaler, cfg.network);
	const auto sigs = make_signatures(split_features(c, s, cfg), m.weights, m.scaler, cfg);

	const auto table = prototype_distance_table(protos, sigs, cfg.vp_q);
	const fs::path out = fs::path(c.run) / ("distance_" + std::string(split_name(s)) + ".csv");
	write_with_header(out, cfg, format_distance_csv(table));

	// pairwise full-signature distances, grouped by class agreement
	std::vector<double> row_within(sigs.size(), 0.0), row_between(sigs.size(), 0.0);
	std::vector<std::size_t> n_within(sigs.size(), 0), n_between(sigs.size(), 0);
	parallel_for(sigs.size(), cfg.jobs, [&](std::size_t i) {
		for (std::size_t j = i + 1; j < sigs.size(); ++j) {
			const double d = signature_distance(sigs[i], sigs[j], cfg.vp_q);
			if (*sigs[i].label == *sigs[j].label) {
				row_within[i] += d;
				++n_within[i];
			} else {
				row_between[i] += d;
				++n_between[i];
			}
		}
	});
	double within = 0, between = 0;
	std::size_t nw = 0, nb = 0;
	for (std::size_t i = 0; i < sigs.size(); ++i) {
		within += row_within[i];
		between += row_between[i];
		nw += n_within[i];
		nb += n_between[i];
	}
	std::size_t correct = 0;
	for (const auto &sig : sigs)
		correct += prototype_classify(sig, protos, cfg.vp_q) == *sig.label;

	std::printf("# %s\n", header(cfg).c_str());
	std::printf("distance table -> %s\n", out.string().c_str());
	std::printf("mean VP distance within class %.4f, between classes %.4f (q = %g/ms)\n", nw ? within / nw : 0.0,
	            nb ? between / nb : 0.0, cfg.vp_q);
	std::printf("prototype classifier accuracy %.4f\n",
	            sigs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(sigs.size()));
	append_meta(c.run, "distance", cfg);
	return 0;
}

int cmd_eval(const Common &c)
{
	const RunConfig cfg = resolve(c, true);
	const Model m = load_model(c);
	const fs::path run(c.run);
	auto labeled = [&](const std::vector<Signature> &sigs) {
		std::vector<LabeledVector> out;
		out.reserve(sigs.size());
		for (const auto &s : sigs)
			out.push_back({net_input_features(s), *s.label});
		return out;
	};
	const auto train_fm = split_features(c, Split::train, cfg);
	const auto protos = prototypes(train_fm, m.weights, m.scaler, cfg.network);
	const auto train_data = labeled(make_signatures(train_fm, m.weights, m.scaler, cfg));
	const SvmModel model = svm_train(train_data, cfg.svm);

	// tables list digits 1..9 then 0
	const std::vector<int> order{1, 2, 3, 4, 5, 6, 7, 8, 9, 0};
	std::string summary = "split,overall_accuracy,average_hit_ratio,average_miss_rate,prototype_accuracy\n";
	std::printf("# %s\n", header(cfg).c_str());
	for (Split s : {Split::train, Split::test_clean, Split::test_noisy}) {
		const auto sigs = s == Split::train ? std::vector<Signature>{} : make_signatures(split_features(c, s, cfg), m.weights, m.scaler, cfg);
		const auto data = s == Split::train ? train_data : labeled(sigs);
		const ConfusionMatrix cm = evaluate(model, data);
		write_with_header(run / ("confusion_" + std::string(split_name(s)) + ".csv"), cfg,
		                  format_confusion_csv(cm, order));
		double proto_acc = std::numeric_limits<double>::quiet_NaN();
		if (!sigs.empty()) {
			std::size_t ok = 0;
			for (const auto &sig : sigs)
				ok += prototype_classify(sig, protos, cfg.vp_q) == *sig.label;
			proto_acc = static_cast<double>(ok) / static_cast<double>(sigs.size());
		}
		char line[160];
		std::snprintf(line, sizeof line, "%s,%.4f,%.4f,%.4f,%.4f\n", split_name(s), cm.overall_accuracy(),
		              cm.average_hit_ratio(), cm.average_miss_rate(), proto_acc);
		summary += line;
		std::printf("%-11s svm accuracy %.4f (%zu/%zu)", split_name(s), cm.overall_accuracy(),
		            static_cast<std::size_t>(cm.trace()), static_cast<std::size_t>(cm.total()));
		if (!sigs.empty())
			std::printf(", prototype accuracy %.4f", proto_acc);
		std::printf("\n");
	}
	write_with_header(run / "eval_summary.csv", cfg, summary);
	append_meta(run, "eval", cfg);
	return 0;
}

int cmd_plot(const Common &c, std::size_t n_spectrograms)
{
	const RunConfig cfg = resolve(c, true);
	const fs::path dir = fs::path(c.run) / "plots";
	fs::create_directories(dir);
	std::size_t n_files = 0;

	if (fs::exists(fs::path(c.run) / "weights.txt")) {
		const auto w = read_synapse_matrix(fs::path(c.run) / "weights.txt");
		for (int u = 0; u < w.cols; ++u) {
			write_weight_image_pgm(w, u, cfg.network.n_frames, cfg.network.n_bands,
			                       dir / ("weights_unit" + std::to_string(u) + ".pgm"));
			++n_files;
		}
	}
	// single-neuron responses to step currents
	for (double current : {0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0}) {
		const auto r = run(cfg.network.neuron, current, 100.0);
		write_v_trace_csv(r, cfg.network.neuron.dt, dir / ("neuron_I" + std::to_string(static_cast<int>(current)) + ".csv"));
		++n_files;
	}
	if (n_spectrograms > 0 && fs::exists(manifest_path(c, Split::train))) {
		const auto clips = load_manifest_clips(manifest_path(c, Split::train));
		std::vector<bool> done(n_digit_classes, false);
		std::size_t written = 0;
		for (const auto &clip : clips) {
			if (written == n_spectrograms)
				break;
			if (!clip.label || done[static_cast<std::size_t>(*clip.label)])
				continue;
			done[static_cast<std::size_t>(*clip.label)] = true;
			write_spectrogram_pgm(clip, cfg.frames, dir / ("spectrogram_" + stem_of(clip.id) + ".pgm"));
			++written;
			++n_files;
		}
	}
	std::printf("# %s\n", header(cfg).c_str());
	std::printf("%zu files -> %s\n", n_files, dir.string().c_str());
	append_meta(c.run, "plot", cfg);
	return 0;
}

} // namespace

int main(int argc, char **argv)
{
	CLI::App app{"spike-signature spoken digit pipeline"};
	app.require_subcommand(1);
	app.set_version_flag("--version", std::string(version));

	Common common;
	bool force = false;
	std::string split = "test-clean";
	std::string feature_split = "all";
	bool spectrograms = false;
	std::size_t limit = 0;
	std::size_t n_spectrograms = 10;

	auto *synth_cmd = app.add_subcommand("synth", "generate the synthetic train / test / noisy corpus");
	add_common(synth_cmd, common, false);
	synth_cmd->add_flag("--force", force, "write into a non-empty corpus directory");

	auto *features_cmd = app.add_subcommand("features", "export band-energy feature grids");
	add_common(features_cmd, common, true);
	features_cmd->add_option("--split", feature_split, "train, test-clean, test-noisy or all")->capture_default_str();
	features_cmd->add_flag("--spectrograms", spectrograms, "also write one spectrogram PGM per clip");

	auto *train_cmd = app.add_subcommand("train", "train the network on the train split");
	add_common(train_cmd, common, true);

	auto *sig_cmd = app.add_subcommand("signatures", "write prototype and per-clip spike rasters");
	add_common(sig_cmd, common, true);
	sig_cmd->add_option("--split", split, "split to render")->capture_default_str();
	sig_cmd->add_option("--limit", limit, "render at most this many clips (0 = all)")->capture_default_str();

	auto *dist_cmd = app.add_subcommand("distance", "prototype x test-class VP distance table");
	add_common(dist_cmd, common, true);
	dist_cmd->add_option("--split", split, "test split")->capture_default_str();

	auto *eval_cmd = app.add_subcommand("eval", "net-input SVM confusion matrices for every split");
	add_common(eval_cmd, common, true);

	auto *plot_cmd = app.add_subcommand("plot", "weight images, neuron traces and spectrograms");
	add_common(plot_cmd, common, true);
	plot_cmd->add_option("--spectrograms", n_spectrograms, "one spectrogram per class, up to this many")
		->capture_default_str();

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp &e) {
		return app.exit(e);
	} catch (const CLI::CallForAllHelp &e) {
		return app.exit(e);
	} catch (const CLI::CallForVersion &e) {
		return app.exit(e);
	} catch (const CLI::ParseError &e) {
		app.exit(e);
		return exit_code(error_kind::config);
	}

	try {
		if (*synth_cmd)
			return cmd_synth(common, force);
		if (*features_cmd)
			return cmd_features(common, feature_split, spectrograms);
		if (*train_cmd)
			return cmd_train(common);
		if (*sig_cmd)
			return cmd_signatures(common, split, limit);
		if (*dist_cmd)
			return cmd_distance(common, split);
		if (*eval_cmd)
			return cmd_eval(common);
		if (*plot_cmd)
			return cmd_plot(common, n_spectrograms);
	} catch (const error &e) {
		std::fprintf(stderr, "error: %s\n", e.what());
		return exit_code(e.kind());
	} catch (const fs::filesystem_error &e) {
		std::fprintf(stderr, "error: %s\n", e.what());
		return exit_code(error_kind::io);
	} catch (const std::exception &e) {
		std::fprintf(stderr, "error: %s\n", e.what());
		return exit_code(error_kind::numeric);
	}
	return 0;
}
