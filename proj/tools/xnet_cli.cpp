#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "xnet/xnet.hpp"

namespace {

using namespace xnet;

ModelGraph<float> make_model(const std::string& kind, std::size_t input_size, std::size_t classes) {
    Shape in{3, input_size, input_size};
    if (kind == "proposed") return assemble_proposed<float>(in, classes);
    if (kind == "baseline") return assemble_baseline<float>(in, classes);
    throw ConfigError("unknown model kind: " + kind);
}

int run_widths(std::size_t d, double w0, double wa, double wm, std::size_t g) {
    WidthPlan plan = generate_widths({d, w0, wa, wm, 1, g, 32});
    std::printf("%4s %10s %10s %6s %6s\n", "j", "u_j", "s_j", "w_j", "stage");
    std::size_t stage = 0, left = plan.stages.empty() ? 0 : plan.stages[0].depth;
    for (std::size_t j = 0; j < plan.w.size(); ++j) {
        while (left == 0 && stage + 1 < plan.stages.size()) left = plan.stages[++stage].depth;
        std::printf("%4zu %10.4f %10.4f %6zu %6zu\n", j, plan.u[j], plan.s[j], plan.w[j], stage + 1);
        --left;
    }
    std::printf("stages (width, depth):");
    for (const StagePlan& s : plan.stages) std::printf(" (%zu, %zu)", s.width, s.depth);
    std::printf("\n");
    return 0;
}

int run_analyze(const std::string& model, std::size_t input_size, std::size_t classes) {
    ModelGraph<float> g = make_model(model, input_size, classes);
    ComplexityReport r = count_complexity(g);
    std::cout << complexity_csv(r, model == "proposed" && input_size == 224);
    return 0;
}

int run_gen_synthetic(const std::string& out_dir, std::size_t classes, std::size_t per_class,
                      std::size_t size, std::uint64_t seed) {
    Manifest m = gen_synthetic(out_dir, classes, per_class, size, seed);
    std::cout << "wrote " << m.rows.size() << " images and manifest.csv to " << out_dir << "\n";
    return 0;
}

int run_train(const std::string& manifest_path, const std::string& root, const std::string& model,
              std::size_t input_size, const std::string& weights_out, const std::string& log_out,
              const TrainConfig& cfg) {
    Manifest m = load_manifest(manifest_path);
    Dataset d = load_dataset(m, root, input_size);
    ModelGraph<float> g = make_model(model, input_size, d.classes.size());
    Rng init_rng(cfg.seed);
    g.init(init_rng);
    std::vector<EpochLog> log = fit(g, d.inputs, d.labels, cfg);
    save_weights(g, weights_out);
    write_file_bytes(log_out, training_log_csv(log));
    for (const EpochLog& e : log)
        std::cout << "epoch " << e.epoch << " loss " << e.loss << " acc " << e.train_accuracy << "\n";
    return 0;
}

int run_eval(const std::string& manifest_path, const std::string& root, const std::string& model,
             std::size_t input_size, const std::string& weights, const std::string& out_dir,
             std::size_t batch) {
    Manifest m = load_manifest(manifest_path);
    Dataset d = load_dataset(m, root, input_size);
    ModelGraph<float> g = make_model(model, input_size, d.classes.size());
    load_weights(g, weights);
    const std::size_t n = d.inputs.extent(0);
    Tensor<float> probs({n, d.classes.size()});
    const std::size_t stride = d.inputs.numel() / n;
    for (std::size_t start = 0; start < n; start += batch) {
        std::size_t end = std::min(start + batch, n);
        Shape bs = d.inputs.shape();
        bs[0] = end - start;
        Tensor<float> bx(bs);
        std::copy(d.inputs.data() + start * stride, d.inputs.data() + end * stride, bx.data());
        Tensor<float> bp = g.predict_probs(bx);
        std::copy(bp.data(), bp.data() + bp.numel(), probs.data() + start * d.classes.size());
    }
    EvalReport r = evaluate_predictions(probs, d.labels);
    std::filesystem::create_directories(out_dir);
    auto in_dir = [&](const std::string& f) { return (std::filesystem::path(out_dir) / f).string(); };
    write_file_bytes(in_dir("confusion.csv"), confusion_csv(r));
    write_file_bytes(in_dir("metrics.csv"), metrics_csv(r, d.classes));
    for (std::size_t c = 0; c < d.classes.size(); ++c)
        write_file_bytes(in_dir("roc_" + d.classes[c] + ".csv"), roc_csv(r.roc[c]));
    std::cout << "accuracy " << r.accuracy << " macro_f1 " << r.macro_f1 << "\n";
    return 0;
}

int run_predict(const std::string& image_path, const std::string& model, std::size_t input_size,
                const std::string& weights, std::size_t classes, const std::string& labels_csv) {
    std::vector<std::string> names;
    if (!labels_csv.empty()) {
        std::istringstream is(labels_csv);
        std::string tok;
        while (std::getline(is, tok, ',')) names.push_back(tok);
        classes = names.size();
    }
    ModelGraph<float> g = make_model(model, input_size, classes);
    load_weights(g, weights);
    Tensor<float> img = decode_pnm<float>(read_file_bytes(image_path));
    img = resize_bilinear(img, input_size, input_size);
    Tensor<float> x = img.reshaped({1, 3, input_size, input_size});
    Tensor<float> p = g.predict_probs(x);
    for (std::size_t c = 0; c < classes; ++c) {
        std::string label = c < names.size() ? names[c] : "class" + std::to_string(c);
        std::printf("%s,%.6f\n", label.c_str(), static_cast<double>(p.at2(0, c)));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RegNetX002 + ConvLSTM + SE classification workbench"};
    app.require_subcommand(1);

    std::uint64_t seed = 3;
    app.add_option("--seed", seed, "global random seed")->capture_default_str();

    auto* widths = app.add_subcommand("widths", "print the width plan for a design-space spec");
    std::size_t w_d = 13, w_g = 8;
    double w_w0 = 24.0, w_wa = 36.44, w_wm = 2.49;
    widths->add_option("--d", w_d)->capture_default_str();
    widths->add_option("--w0", w_w0)->capture_default_str();
    widths->add_option("--wa", w_wa)->capture_default_str();
    widths->add_option("--wm", w_wm)->capture_default_str();
    widths->add_option("--g", w_g)->capture_default_str();

    auto* analyze = app.add_subcommand("analyze", "print the parameter/FLOP report as CSV");
    std::string a_model = "proposed";
    std::size_t a_input = 224, a_classes = 3;
    analyze->add_option("--model", a_model, "proposed or baseline")->capture_default_str();
    analyze->add_option("--input-size", a_input)->capture_default_str();
    analyze->add_option("--classes", a_classes)->capture_default_str();

    auto* gen = app.add_subcommand("gen-synthetic", "write a deterministic synthetic dataset");
    std::string g_out = "synthetic";
    std::size_t g_classes = 3, g_per = 10, g_size = 64;
    gen->add_option("--out", g_out)->capture_default_str();
    gen->add_option("--classes", g_classes)->capture_default_str();
    gen->add_option("--per-class", g_per)->capture_default_str();
    gen->add_option("--size", g_size)->capture_default_str();

    auto* train = app.add_subcommand("train", "train a model from a manifest");
    std::string t_manifest, t_root = ".", t_model = "proposed";
    std::string t_weights = "weights.bin", t_log = "train_log.csv";
    std::size_t t_input = 224;
    TrainConfig cfg;
    train->add_option("--manifest", t_manifest)->required();
    train->add_option("--root", t_root)->capture_default_str();
    train->add_option("--model", t_model)->capture_default_str();
    train->add_option("--input-size", t_input)->capture_default_str();
    train->add_option("--weights-out", t_weights)->capture_default_str();
    train->add_option("--log-out", t_log)->capture_default_str();
    train->add_option("--epochs", cfg.epochs)->capture_default_str();
    train->add_option("--lr", cfg.learning_rate)->capture_default_str();
    train->add_option("--batch-size", cfg.batch_size)->capture_default_str();

    auto* eval = app.add_subcommand("eval", "evaluate weights and write the report CSV set");
    std::string e_manifest, e_root = ".", e_model = "proposed", e_weights, e_out = "eval_report";
    std::size_t e_input = 224, e_batch = 16;
    eval->add_option("--manifest", e_manifest)->required();
    eval->add_option("--root", e_root)->capture_default_str();
    eval->add_option("--model", e_model)->capture_default_str();
    eval->add_option("--input-size", e_input)->capture_default_str();
    eval->add_option("--weights", e_weights)->required();
    eval->add_option("--out-dir", e_out)->capture_default_str();
    eval->add_option("--batch-size", e_batch)->capture_default_str();

    auto* predict = app.add_subcommand("predict", "print class probabilities for one image");
    std::string p_image, p_model = "proposed", p_weights, p_labels;
    std::size_t p_input = 224, p_classes = 3;
    predict->add_option("--image", p_image)->required();
    predict->add_option("--model", p_model)->capture_default_str();
    predict->add_option("--input-size", p_input)->capture_default_str();
    predict->add_option("--weights", p_weights)->required();
    predict->add_option("--classes", p_classes)->capture_default_str();
    predict->add_option("--labels", p_labels, "comma-separated class names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    try {
        cfg.seed = seed;
        if (widths->parsed()) return run_widths(w_d, w_w0, w_wa, w_wm, w_g);
        if (analyze->parsed()) return run_analyze(a_model, a_input, a_classes);
        if (gen->parsed()) return run_gen_synthetic(g_out, g_classes, g_per, g_size, seed);
        if (train->parsed())
            return run_train(t_manifest, t_root, t_model, t_input, t_weights, t_log, cfg);
        if (eval->parsed()) return run_eval(e_manifest, e_root, e_model, e_input, e_weights, e_out, e_batch);
        if (predict->parsed())
            return run_predict(p_image, p_model, p_input, p_weights, p_classes, p_labels);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
