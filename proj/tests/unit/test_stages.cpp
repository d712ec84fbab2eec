#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "pendown/stages.hpp"
#include "pendown/synth.hpp"

using namespace pendown;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("pendown_stages_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

synth::SynthConfig tiny_synth(std::uint64_t seed = 5) {
    synth::SynthConfig cfg;
    cfg.cells = {{'F', false, 2, 2}, {'M', false, 2, 2}};
    cfg.duration_s = 2.0;
    cfg.seed = seed;
    return cfg;
}

coh::EvalConfig small_eval(std::uint64_t seed = 77) {
    coh::EvalConfig cfg;
    cfg.protocol.reps = 3;
    cfg.protocol.cv_folds = 3;
    cfg.protocol.seed = seed;
    cfg.protocol.grid.c_values = {0.1, 1.0, 10.0};
    cfg.protocol.grid.z_values = {0.5, 2.0};
    return cfg;
}

feat::FeatureId fid(const std::string& base) {
    return feat::FeatureId{1, feat::Stream::Global, base, "mean"};
}

}  // namespace

TEST_CASE("atomic write creates parents and replaces content", "[stages]") {
    const fs::path dir = fresh_dir("atomic");
    const fs::path target = dir / "a" / "b" / "out.txt";
    stages::atomic_write(target, "first\n");
    REQUIRE(ink::read_file(target) == "first\n");
    stages::atomic_write(target, "second\n");
    REQUIRE(ink::read_file(target) == "second\n");
    REQUIRE_FALSE(fs::exists(target.string() + ".tmp"));
    fs::remove_all(dir);
}

TEST_CASE("provenance serializes stage seed config and inputs", "[stages]") {
    stages::Provenance p;
    p.stage = "demo";
    p.seed = 42;
    p.config = {{"k", "v"}, {"k2", "w"}};
    p.inputs = {{"in.txt", "deadbeef"}};
    REQUIRE(stages::serialize_provenance(p) ==
            "# pendown provenance v1\n"
            "stage demo\n"
            "seed 42\n"
            "config k v\n"
            "config k2 w\n"
            "input in.txt fnv64 deadbeef\n");

    const fs::path dir = fresh_dir("prov");
    stages::atomic_write(dir / "out.txt", "payload");
    stages::write_provenance(dir / "out.txt", p);
    REQUIRE(ink::read_file(dir / "out.txt.prov") == stages::serialize_provenance(p));
    fs::remove_all(dir);
}

TEST_CASE("digests are stable for equal content and sensitive to changes", "[stages]") {
    REQUIRE(stages::content_digest("abc") == stages::content_digest("abc"));
    REQUIRE(stages::content_digest("abc") != stages::content_digest("abd"));
    REQUIRE(stages::content_digest("abc").size() == 16);
}

TEST_CASE("dataset round trips through the disk layout", "[stages]") {
    const fs::path dir = fresh_dir("dataset");
    const ink::Dataset ds = synth::generate(tiny_synth());
    const fs::path manifest = stages::write_dataset(ds, dir);
    REQUIRE(manifest == dir / "manifest.txt");

    const ink::Dataset loaded = ink::load_dataset(manifest);
    REQUIRE(loaded.subjects.size() == ds.subjects.size());
    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        REQUIRE(loaded.subjects[i].id == ds.subjects[i].id);
        REQUIRE(loaded.subjects[i].sex == ds.subjects[i].sex);
        REQUIRE(loaded.subjects[i].age == ds.subjects[i].age);
        REQUIRE(loaded.subjects[i].label == ds.subjects[i].label);
        REQUIRE(loaded.subjects[i].updrs.has_value() == ds.subjects[i].updrs.has_value());
        if (ds.subjects[i].updrs) REQUIRE(*loaded.subjects[i].updrs == *ds.subjects[i].updrs);
    }
    REQUIRE(loaded.recordings.size() == ds.recordings.size());
    for (std::size_t i = 0; i < ds.recordings.size(); ++i)
        REQUIRE(ink::serialize_recording(loaded.recordings[i]) ==
                ink::serialize_recording(ds.recordings[i]));

    const std::string digest = stages::dataset_digest(manifest);
    REQUIRE(digest == stages::dataset_digest(manifest));
    const fs::path one_rec = dir / "rec" / (ds.recordings[0].subject_id + "_t1.txt");
    stages::atomic_write(one_rec, ink::read_file(one_rec) + "# appended\n");
    REQUIRE(stages::dataset_digest(manifest) != digest);
    fs::remove_all(dir);
}

TEST_CASE("ranking file round trips and resolves columns", "[stages]") {
    std::vector<sel::RankedFeature> ranked(2);
    ranked[0].feature = fid("f1");
    ranked[0].individual_accuracy = 87.5;
    ranked[0].rank = 1;
    ranked[1].feature = fid("f0");
    ranked[1].rank = 2;  // accuracy absent -> NA

    const std::string text = stages::serialize_ranking(ranked, 1, "Male", sel::RankOrder::Random);
    const stages::RankingFile rf = stages::parse_ranking(text, "probe");
    REQUIRE(rf.task == 1);
    REQUIRE(rf.group == "Male");
    REQUIRE(rf.order == sel::RankOrder::Random);
    REQUIRE(rf.ranked.size() == 2);
    REQUIRE(rf.ranked[0].feature == ranked[0].feature);
    REQUIRE(rf.ranked[0].individual_accuracy.has_value());
    REQUIRE(*rf.ranked[0].individual_accuracy == 87.5);
    REQUIRE_FALSE(rf.ranked[1].individual_accuracy.has_value());
    REQUIRE(rf.ranked[1].rank == 2);

    // Re-serializing the parsed ranking reproduces the bytes.
    REQUIRE(stages::serialize_ranking(rf.ranked, rf.task, rf.group, rf.order) == text);

    feat::FeatureMatrix m = synth::gaussian_matrix(2, 3, 1, 1.0, 4);
    const auto resolved = stages::resolve_ranking(rf, m);
    REQUIRE(resolved[0].column == 1);
    REQUIRE(resolved[1].column == 0);

    stages::RankingFile missing = rf;
    missing.ranked[0].feature = fid("f9");
    REQUIRE_THROWS_AS(stages::resolve_ranking(missing, m), ValidationError);

    REQUIRE_THROWS_AS(stages::parse_ranking("", "probe"), ParseError);
    REQUIRE_THROWS_AS(stages::parse_ranking("wrong\theader\there\n1\tx\ty\n", "probe"), ParseError);
}

TEST_CASE("curve and filter grid serializers are stable", "[stages]") {
    sel::AccuracyCurve curve;
    curve.points = {{1, 80.0, 2.5}, {2, 90.25, 0.0}};
    REQUIRE(stages::serialize_curve(curve, sel::RankOrder::Descending, "Old") ==
            "# pendown curve v1\n"
            "n\tmean_acc\tstd_acc\torder\tcohort\n"
            "1\t80\t2.5\tdescending\tOld\n"
            "2\t90.25\t0\tdescending\tOld\n");

    std::vector<stages::FilterRecord> recs(1);
    recs[0] = {1, "Male", 3, 4, 2, 10, true};
    REQUIRE(stages::serialize_filter_grid(recs) ==
            "# pendown filter report v1\n"
            "task\tgroup\tn_pd\tn_hc\tpassed\ttotal\tfallback\n"
            "1\tMale\t3\t4\t2\t10\t1\n");
}

TEST_CASE("report round trips through serialize and parse", "[stages]") {
    coh::CohortReport rep;
    rep.task = 1;
    rep.scheme.kind = coh::Scheme::Sex;
    rep.leak = sel::LeakMode::Paper;

    coh::GroupReport good;
    good.name = "Male";
    good.n_pd = 5;
    good.n_hc = 4;
    good.evaluated = true;
    good.filter_kept = 2;
    good.filter_total = 9;
    good.best_n = 1;
    good.ranking.resize(2);
    good.ranking[0].feature = fid("f1");
    good.ranking[1].feature = fid("f0");
    good.final_metrics.mean_accuracy = 85.5;
    good.final_metrics.std_accuracy = 1.25;
    good.final_metrics.mean_precision = 90.0;
    good.final_metrics.totals = {9, 1, 8, 2};

    coh::GroupReport skipped;
    skipped.name = "Female";
    skipped.n_pd = 1;
    skipped.skip_reason = "class imbalance: need more rows";
    rep.groups = {good, skipped};

    const std::string text =
        stages::serialize_report(rep, {{"task", "1"}, {"note", "two words"}});
    const stages::ReportFile rf = stages::parse_report(text, "probe");

    REQUIRE(rf.annotations.at("task") == "1");
    REQUIRE(rf.annotations.at("note") == "two words");
    REQUIRE(rf.groups.size() == 2);
    REQUIRE(rf.groups[0].name == "Male");
    REQUIRE(rf.groups[0].evaluated);
    REQUIRE(rf.groups[0].n_pd == 5);
    REQUIRE(rf.groups[0].n_hc == 4);
    REQUIRE(rf.groups[0].acc == 85.5);
    REQUIRE(rf.groups[0].acc_std == 1.25);
    REQUIRE(rf.groups[0].pre.has_value());
    REQUIRE(*rf.groups[0].pre == 90.0);
    REQUIRE_FALSE(rf.groups[0].rec.has_value());
    REQUIRE_FALSE(rf.groups[1].evaluated);
    REQUIRE(rf.groups[1].skip_reason.find("class imbalance") != std::string::npos);

    REQUIRE(text.find("filter kept 2 total 9 fallback 0\n") != std::string::npos);
    REQUIRE(text.find("best_n 1\n") != std::string::npos);
    REQUIRE(text.find("selected " + fid("f1").render() + "\n") != std::string::npos);
    REQUIRE(text.find("confusion tp 9 fp 1 tn 8 fn 2\n") != std::string::npos);

    REQUIRE(stages::serialize_comparison(rf) ==
            "# pendown comparison v1\n"
            "class\tp_acc\tp_pre\tp_rec\tsd\n"
            "Male\t85.5\t90\tNA\t1.25\n");
    REQUIRE(stages::serialize_bars(rf) ==
            "# pendown bars v1\n"
            "group\taccuracy\n"
            "Male\t85.5\n");

    REQUIRE_THROWS_AS(stages::parse_report("group A\ngroup B\n", "probe"), ParseError);
    REQUIRE_THROWS_AS(stages::parse_report("group A\ncounts pd 1 hc 1\n", "probe"), ParseError);
    REQUIRE_THROWS_AS(stages::parse_report("counts pd 1 hc 1\n", "probe"), ParseError);
}

TEST_CASE("clean mode report names the per repetition filter", "[stages]") {
    coh::CohortReport rep;
    rep.task = 1;
    rep.leak = sel::LeakMode::Clean;
    coh::GroupReport g;
    g.name = "Combined";
    g.n_pd = 3;
    g.n_hc = 3;
    g.evaluated = true;
    g.filter_fallback = true;
    g.final_metrics.mean_accuracy = 50.0;
    rep.groups = {g};
    const std::string text = stages::serialize_report(rep, {});
    REQUIRE(text.find("filter per_rep fallback 1\n") != std::string::npos);
    REQUIRE(text.find("best_n") == std::string::npos);
    REQUIRE(text.find("selected") == std::string::npos);
}

TEST_CASE("staged filter rank evaluate matches single shot evaluation", "[stages]") {
    const fs::path dir = fresh_dir("compose");
    const feat::FeatureMatrix m = synth::gaussian_matrix(6, 4, 2, 2.5, 5);
    const fs::path matrix_path = dir / "matrix.tsv";
    stages::atomic_write(matrix_path, feat::serialize_matrix(m));

    const coh::EvalConfig cfg = small_eval(77);
    const coh::CohortScheme scheme{coh::Scheme::Combined, 65};

    const fs::path direct_dir = dir / "direct";
    stages::stage_evaluate(matrix_path, scheme, cfg, direct_dir);

    const fs::path filt_dir = dir / "filtered";
    const stages::FilterStageResult filt =
        stages::stage_filter(matrix_path, scheme, cfg.protocol.alpha, filt_dir);
    REQUIRE(filt.reduced_paths.size() == 1);
    const fs::path rank_path = dir / "ranking.tsv";
    stages::stage_rank(filt.reduced_paths[0], cfg.order, cfg.protocol, rank_path);
    const fs::path staged_dir = dir / "staged";
    stages::stage_evaluate_staged(filt.reduced_paths[0], rank_path, cfg, staged_dir);

    REQUIRE(ink::read_file(staged_dir / "report.txt") == ink::read_file(direct_dir / "report.txt"));
    REQUIRE(ink::read_file(staged_dir / "ranking_Combined.tsv") ==
            ink::read_file(direct_dir / "ranking_Combined.tsv"));
    REQUIRE(ink::read_file(staged_dir / "curve_Combined.tsv") ==
            ink::read_file(direct_dir / "curve_Combined.tsv"));
    // The intermediate ranking artifact is the same file the direct run wrote.
    REQUIRE(ink::read_file(rank_path) == ink::read_file(direct_dir / "ranking_Combined.tsv"));
    fs::remove_all(dir);
}

TEST_CASE("evaluation artifacts are reproducible run to run", "[stages]") {
    const fs::path dir = fresh_dir("repro");
    const feat::FeatureMatrix m = synth::gaussian_matrix(5, 3, 1, 2.0, 8);
    const fs::path matrix_path = dir / "matrix.tsv";
    stages::atomic_write(matrix_path, feat::serialize_matrix(m));

    const coh::EvalConfig cfg = small_eval(9);
    stages::stage_evaluate(matrix_path, {coh::Scheme::Combined, 65}, cfg, dir / "one");
    stages::stage_evaluate(matrix_path, {coh::Scheme::Combined, 65}, cfg, dir / "two");
    REQUIRE(ink::read_file(dir / "one" / "report.txt") == ink::read_file(dir / "two" / "report.txt"));
    REQUIRE(ink::read_file(dir / "one" / "curve_Combined.tsv") ==
            ink::read_file(dir / "two" / "curve_Combined.tsv"));
    fs::remove_all(dir);
}

TEST_CASE("filter stage scopes matrices per group with annotations", "[stages]") {
    const fs::path dir = fresh_dir("filter");
    const feat::FeatureMatrix m = synth::gaussian_matrix(6, 3, 1, 2.5, 13);  // sexes alternate
    const fs::path matrix_path = dir / "matrix.tsv";
    stages::atomic_write(matrix_path, feat::serialize_matrix(m));

    const stages::FilterStageResult res =
        stages::stage_filter(matrix_path, {coh::Scheme::Sex, 65}, 0.05, dir / "out");
    REQUIRE(res.reduced_paths.size() == 3);
    REQUIRE(res.reduced_paths[0].filename() == "reduced_Combined.tsv");
    REQUIRE(res.reduced_paths[1].filename() == "reduced_Male.tsv");
    REQUIRE(res.reduced_paths[2].filename() == "reduced_Female.tsv");

    const feat::FeatureMatrix male =
        feat::parse_matrix(ink::read_file(res.reduced_paths[1]), "male");
    REQUIRE(male.annotations.at("scope") == "Male");
    REQUIRE(male.annotations.at("scheme") == "sex");
    REQUIRE(male.annotations.at("alpha") == "0.05");
    REQUIRE(male.annotations.at("filter_total") == "3");
    REQUIRE(male.row_count() == 6);  // half of the 12 subjects
    for (char s : male.sexes) REQUIRE(s == 'M');

    const std::string grid = ink::read_file(res.grid_path);
    REQUIRE(grid.find("Combined\t6\t6\t") != std::string::npos);
    REQUIRE(grid.find("Male\t3\t3\t") != std::string::npos);
    REQUIRE(grid.find("Female\t3\t3\t") != std::string::npos);

    // A rank over the scoped matrix stamps the group into the artifact.
    const fs::path rank_path = dir / "rank_male.tsv";
    stages::stage_rank(res.reduced_paths[1], sel::RankOrder::Descending, small_eval(2).protocol,
                       rank_path);
    const stages::RankingFile rf = stages::parse_ranking(ink::read_file(rank_path), "male");
    REQUIRE(rf.group == "Male");

    // Mismatched scope and ranking group must not silently evaluate.
    REQUIRE_THROWS_AS(
        stages::stage_evaluate_staged(res.reduced_paths[2], rank_path, small_eval(2), dir / "bad"),
        ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("train stage writes a usable model artifact", "[stages]") {
    const fs::path dir = fresh_dir("train");
    const feat::FeatureMatrix m = synth::gaussian_matrix(5, 2, 1, 3.0, 3);
    const fs::path matrix_path = dir / "matrix.tsv";
    stages::atomic_write(matrix_path, feat::serialize_matrix(m));

    sel::ProtocolConfig pc = small_eval(6).protocol;
    const fs::path model_path = dir / "model.txt";
    stages::stage_train(matrix_path, fs::path{}, 0, pc, model_path);
    const svm::SvmModel model = svm::parse_model(ink::read_file(model_path), "model");
    const std::vector<double> probe = {3.0, 0.0};
    const int pred = model.predict(probe);
    REQUIRE((pred == 1 || pred == -1));

    const std::string prov = ink::read_file(model_path.string() + ".prov");
    REQUIRE(prov.find("stage train") != std::string::npos);
    REQUIRE(prov.find("features 2") != std::string::npos);

    // Restricting through a ranking file narrows the model's inputs.
    std::vector<sel::RankedFeature> ranked(1);
    ranked[0].feature = m.features[0];
    ranked[0].rank = 1;
    const fs::path rank_path = dir / "rank.tsv";
    stages::atomic_write(rank_path,
                         stages::serialize_ranking(ranked, 1, "Combined",
                                                   sel::RankOrder::Descending));
    stages::stage_train(matrix_path, rank_path, 1, pc, dir / "model1.txt");
    const svm::SvmModel narrow = svm::parse_model(ink::read_file(dir / "model1.txt"), "model1");
    const std::vector<double> one = {3.0};
    REQUIRE_NOTHROW(narrow.predict(one));
    fs::remove_all(dir);
}

TEST_CASE("report stage renders the comparison table and bars", "[stages]") {
    const fs::path dir = fresh_dir("report");
    const feat::FeatureMatrix m = synth::gaussian_matrix(5, 2, 1, 2.5, 31);
    const fs::path matrix_path = dir / "matrix.tsv";
    stages::atomic_write(matrix_path, feat::serialize_matrix(m));
    const fs::path report_path =
        stages::stage_evaluate(matrix_path, {coh::Scheme::Combined, 65}, small_eval(3), dir / "eval");

    const stages::ReportStageResult res = stages::stage_report(report_path, dir / "render");
    const std::string table = ink::read_file(res.table_path);
    const std::string bars = ink::read_file(res.bars_path);
    REQUIRE(table.rfind("# pendown comparison v1\n", 0) == 0);
    REQUIRE(table.find("Combined\t") != std::string::npos);
    REQUIRE(bars.rfind("# pendown bars v1\n", 0) == 0);
    REQUIRE(bars.find("Combined\t") != std::string::npos);
    fs::remove_all(dir);
}
