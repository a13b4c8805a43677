// tiattack: train surrogate models, craft (TI-)FGSM/BIM/MI-FGSM/DIM adversarial
// examples, and run transfer experiments.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration error,
// 3 numerical divergence.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tiattack/attacks.hpp"
#include "tiattack/dataset.hpp"
#include "tiattack/errors.hpp"
#include "tiattack/harness.hpp"
#include "tiattack/io.hpp"
#include "tiattack/kernels.hpp"
#include "tiattack/models.hpp"
#include "tiattack/oracle.hpp"
#include "tiattack/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw tia::ConfigError("cannot write " + out_path);
    out << text;
}

// $TIA_DATA_DIR overrides the bundled subset location.
std::string data_file(const char* name) {
    const char* dir = std::getenv("TIA_DATA_DIR");
    return (fs::path(dir && *dir ? dir : "data/mnist") / name).string();
}

struct DataArgs {
    std::string images = data_file("t10k-images-idx3-ubyte");
    std::string labels = data_file("t10k-labels-idx1-ubyte");
    int count = 500;
    int offset = 0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--images", images, "IDX image file")->capture_default_str();
        cmd->add_option("--labels", labels, "IDX label file")->capture_default_str();
        cmd->add_option("--count", count, "number of images")->capture_default_str();
        cmd->add_option("--offset", offset, "index of the first image")->capture_default_str();
    }

    tia::LabeledDataset load() const {
        for (const auto& p : {images, labels})
            if (!fs::exists(p)) throw tia::ConfigError("dataset file not found: " + p);
        tia::LabeledDataset all = tia::load_idx_dataset(images, labels);
        if (offset < 0 || count < 1 || offset + count > all.size()) {
            throw tia::ConfigError("requested images [" + std::to_string(offset) + ", " +
                                   std::to_string(offset + count) + ") exceed dataset size " + std::to_string(all.size()));
        }
        return all.subset(offset, count);
    }
};

tia::ClassifierPtr load_models(const std::vector<std::string>& dirs) {
    std::vector<tia::ClassifierPtr> models;
    for (const auto& d : dirs) models.push_back(tia::load_model(d));
    return models.size() == 1 ? models.front() : tia::fuse_logits(models);
}

// Fixed instrument for exact checks: logit_c = 0.01 (c - 4.5) sum(x) + 0.1 c.
tia::ClassifierPtr linear_sum_instrument(tia::InputShape input) {
    std::vector<double> w, b;
    for (int c = 0; c < 10; ++c) {
        w.push_back(0.01 * (c - 4.5));
        b.push_back(0.1 * c);
    }
    return std::make_shared<tia::LinearSumModel>(w, b, input);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Translation-invariant adversarial attacks at desk scale"};
    app.require_subcommand(1);

    // train -------------------------------------------------------------
    auto* train = app.add_subcommand("train", "train a TinyCnn surrogate");
    std::string train_images = data_file("train-images-idx3-ubyte");
    std::string train_labels = data_file("train-labels-idx1-ubyte");
    std::string test_images = data_file("t10k-images-idx3-ubyte");
    std::string test_labels = data_file("t10k-labels-idx1-ubyte");
    tia::TrainConfig tc;
    std::string model_out;
    train->add_option("--train-images", train_images)->capture_default_str();
    train->add_option("--train-labels", train_labels)->capture_default_str();
    train->add_option("--test-images", test_images)->capture_default_str();
    train->add_option("--test-labels", test_labels)->capture_default_str();
    train->add_option("--seed", tc.seed)->capture_default_str();
    train->add_option("--epochs", tc.epochs)->capture_default_str();
    train->add_option("--lr", tc.learning_rate)->capture_default_str();
    train->add_option("--batch", tc.batch_size)->capture_default_str();
    train->add_option("--shift-augment", tc.shift_augment, "max random shift in pixels")->capture_default_str();
    train->add_option("--out", model_out, "model directory")->required();

    // attack / evaluate ---------------------------------------------------
    auto* atk = app.add_subcommand("attack", "craft adversarial examples; writes <out>.npy and <out>.json");
    DataArgs atk_data;
    atk_data.add_to(atk);
    std::vector<std::string> atk_models;
    std::string method = "mifgsm", norm = "linf", kernel_kind = "gaussian", atk_out, pgm_dir;
    int kernel_k = -1;
    double eps = -1, alpha = -1, mu = 1.0, dim_prob = 0.7, dim_low = 0.9;
    int iters = 10;
    std::uint64_t seed = 0;
    atk->add_option("--model", atk_models, "model directory; repeat to fuse logits with equal weights")->required();
    atk->add_option("--method", method, "fgsm | bim | mifgsm | dim")->capture_default_str();
    atk->add_option("--norm", norm, "linf | l2")->capture_default_str();
    atk->add_option("--eps", eps, "perturbation bound on the [0,1] scale (default: 16/255, or (10/255)sqrt(d) for l2)");
    atk->add_option("--iters", iters)->capture_default_str();
    atk->add_option("--alpha", alpha, "step size (default eps/iters)");
    atk->add_option("--mu", mu, "momentum decay")->capture_default_str();
    atk->add_option("--kernel", kernel_kind, "uniform | linear | gaussian")->capture_default_str();
    atk->add_option("--k", kernel_k, "kernel half-width; omit for the plain attack");
    atk->add_option("--dim-prob", dim_prob)->capture_default_str();
    atk->add_option("--dim-low", dim_low, "smallest resize fraction")->capture_default_str();
    atk->add_option("--seed", seed)->capture_default_str();
    atk->add_option("--out", atk_out, "output prefix")->required();
    atk->add_option("--pgm", pgm_dir, "also write each adversarial image as PGM into this directory");

    auto* eval = app.add_subcommand("evaluate", "accuracy on clean or adversarial images");
    DataArgs eval_data;
    eval_data.add_to(eval);
    std::vector<std::string> eval_models;
    std::string adv_path;
    eval->add_option("--model", eval_models)->required();
    eval->add_option("--adv", adv_path, "NPY batch replacing the clean images");

    // experiments ---------------------------------------------------------
    auto* run = app.add_subcommand("run-plan", "run a JSON experiment plan");
    std::string plan_path;
    run->add_option("plan", plan_path)->required();

    auto* sweep = app.add_subcommand("sweep", "kernel-size sweep over a plan's attacks");
    std::string sweep_plan;
    std::vector<int> sizes{1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21};
    sweep->add_option("plan", sweep_plan)->required();
    sweep->add_option("--sizes", sizes, "odd kernel side lengths")->delimiter(',')->capture_default_str();

    // inspection ----------------------------------------------------------
    auto* kdump = app.add_subcommand("kernel-dump", "write a kernel matrix as CSV");
    std::string kd_kind = "gaussian", kd_out;
    int kd_k = 7;
    kdump->add_option("--kind", kd_kind)->capture_default_str();
    kdump->add_option("--k", kd_k, "half-width")->capture_default_str();
    kdump->add_option("--out", kd_out, "file (default stdout)");

    auto* surface = app.add_subcommand("loss-surface", "mean loss under every translation in [-k,k]^2, as CSV");
    DataArgs ls_data;
    ls_data.count = 200;
    ls_data.add_to(surface);
    std::vector<std::string> ls_models;
    bool ls_linear = false;
    int ls_k = 10;
    std::string ls_mode = "zero", ls_out;
    surface->add_option("--model", ls_models);
    surface->add_flag("--linear-sum", ls_linear, "use the built-in shift-invariant instrument model");
    surface->add_option("--k", ls_k)->capture_default_str();
    surface->add_option("--mode", ls_mode, "zero | circular")->capture_default_str();
    surface->add_option("--out", ls_out);

    auto* verify = app.add_subcommand("verify", "compare the translated-ensemble gradient with the smoothed gradient");
    DataArgs vf_data;
    vf_data.count = 20;
    vf_data.add_to(verify);
    std::vector<std::string> vf_models;
    bool vf_linear = false;
    std::string vf_kind = "gaussian", vf_mode = "zero", vf_out;
    int vf_k = 3;
    verify->add_option("--model", vf_models);
    verify->add_flag("--linear-sum", vf_linear, "use the built-in shift-invariant instrument model");
    verify->add_option("--kind", vf_kind)->capture_default_str();
    verify->add_option("--k", vf_k)->capture_default_str();
    verify->add_option("--mode", vf_mode, "zero | circular")->capture_default_str();
    verify->add_option("--out", vf_out, "JSON report path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*train) {
            for (const auto& p : {train_images, train_labels})
                if (!fs::exists(p)) throw tia::ConfigError("dataset file not found: " + p);
            const auto data = tia::load_idx_dataset(train_images, train_labels);
            std::optional<tia::LabeledDataset> test;
            if (fs::exists(test_images) && fs::exists(test_labels)) test = tia::load_idx_dataset(test_images, test_labels);
            auto result = tia::train_tiny_cnn(data, tc, test ? &*test : nullptr);
            tia::save_model(result.model, model_out);
            json j{{"model", model_out},
                   {"seed", tc.seed},
                   {"epochs", tc.epochs},
                   {"lr", tc.learning_rate},
                   {"batch", tc.batch_size},
                   {"shift_augment", tc.shift_augment},
                   {"train_accuracy", result.train_accuracy},
                   {"test_accuracy", result.test_accuracy},
                   {"epoch_loss", result.epoch_loss}};
            std::cout << j.dump(2) << '\n';
        } else if (*atk) {
            const auto data = atk_data.load();
            const auto model = load_models(atk_models);
            const tia::InputShape input{data.images.shape().c, data.images.shape().h, data.images.shape().w};
            json spec{{"method", method}, {"norm", norm}, {"iterations", iters}, {"momentum", mu},
                      {"dim_prob", dim_prob}, {"dim_resize_low", dim_low}, {"seed", seed}};
            if (eps >= 0) spec["epsilon"] = eps;
            if (alpha > 0) spec["alpha"] = alpha;
            if (kernel_k >= 0) spec["kernel"] = {{"kind", kernel_kind}, {"k", kernel_k}};
            const auto cfg = tia::attack_config_from_json(spec, input);
            const auto result = tia::attack(*model, data.images, data.labels, cfg);

            if (fs::path(atk_out).has_parent_path()) fs::create_directories(fs::path(atk_out).parent_path());
            tia::write_npy(atk_out + ".npy", result.x_adv);
            json side{{"config", tia::to_json(cfg)},
                      {"config_digest", tia::config_digest(cfg)},
                      {"seed", cfg.seed},
                      {"models", atk_models},
                      {"images", atk_data.images},
                      {"offset", atk_data.offset},
                      {"count", atk_data.count},
                      {"labels", data.labels},
                      {"success", result.success},
                      {"perturbation_norm", result.perturbation_norm},
                      {"success_rate", result.success_rate()}};
            std::ofstream(atk_out + ".json") << side.dump(2) << '\n';
            if (!pgm_dir.empty()) {
                fs::create_directories(pgm_dir);
                for (int i = 0; i < data.size(); ++i) {
                    tia::write_pgm(fs::path(pgm_dir) / ("adv_" + std::to_string(atk_data.offset + i) + ".pgm"),
                                   result.x_adv, i);
                }
            }
            std::cout << cfg.name() << " source success rate " << result.success_rate() << '\n';
        } else if (*eval) {
            const auto data = eval_data.load();
            const auto model = load_models(eval_models);
            tia::Tensor images = data.images;
            if (!adv_path.empty()) {
                images = tia::read_npy_tensor(adv_path);
                if (images.shape() != data.images.shape()) {
                    throw tia::ConfigError("adversarial batch " + images.shape().str() + " does not match " +
                                           data.images.shape().str());
                }
            }
            const auto pred = tia::predict(*model, images);
            int correct = 0;
            for (int i = 0; i < data.size(); ++i) correct += pred[i] == data.labels[i];
            const double acc = static_cast<double>(correct) / data.size();
            std::cout << json{{"n", data.size()}, {"accuracy", acc}, {"misclassification_rate", 1.0 - acc}}.dump(2) << '\n';
        } else if (*run) {
            const auto report = tia::run_plan(tia::load_plan(plan_path));
            std::cout << tia::report_csv(report);
        } else if (*sweep) {
            const auto report = tia::kernel_size_sweep(tia::load_plan(sweep_plan), sizes);
            std::cout << tia::report_csv(report);
        } else if (*kdump) {
            const auto kernel = tia::make_kernel(tia::parse_kernel_kind(kd_kind), kd_k);
            std::ostringstream os;
            for (int r = 0; r < kernel.side(); ++r) {
                for (int c = 0; c < kernel.side(); ++c) os << (c ? "," : "") << full_precision(kernel.weights.at(r, c));
                os << '\n';
            }
            emit(os.str(), kd_out);
        } else if (*surface) {
            const auto data = ls_data.load();
            const tia::InputShape input{data.images.shape().c, data.images.shape().h, data.images.shape().w};
            if (ls_models.empty() && !ls_linear) throw tia::ConfigError("loss-surface needs --model or --linear-sum");
            const auto model = ls_linear ? linear_sum_instrument(input) : load_models(ls_models);
            const auto s = tia::loss_surface(*model, data.images, data.labels, ls_k, tia::parse_shift_mode(ls_mode),
                                             ls_linear ? "linear_sum" : ls_models.front());
            std::ostringstream os;
            os << "i\\j";
            for (int j = -ls_k; j <= ls_k; ++j) os << ',' << j;
            os << '\n';
            for (int i = -ls_k; i <= ls_k; ++i) {
                os << i;
                for (int j = -ls_k; j <= ls_k; ++j) os << ',' << full_precision(s.grid.at(i + ls_k, j + ls_k));
                os << '\n';
            }
            emit(os.str(), ls_out);
            std::cerr << "max relative deviation from center: " << s.max_relative_deviation() << '\n';
        } else if (*verify) {
            const auto data = vf_data.load();
            const tia::InputShape input{data.images.shape().c, data.images.shape().h, data.images.shape().w};
            if (vf_models.empty() && !vf_linear) throw tia::ConfigError("verify needs --model or --linear-sum");
            const auto model = vf_linear ? linear_sum_instrument(input) : load_models(vf_models);
            const auto kernel = tia::make_kernel(tia::parse_kernel_kind(vf_kind), vf_k);
            const auto r = tia::compare(*model, data.images, data.labels, kernel, tia::parse_shift_mode(vf_mode));
            json j{{"model", vf_linear ? "linear_sum" : vf_models.front()},
                   {"kernel", tia::to_string(r.kind)},
                   {"k", r.half_width},
                   {"mode", tia::to_string(r.mode)},
                   {"n", data.size()},
                   {"cosine", r.cosine},
                   {"max_abs_error", r.max_abs_error},
                   {"relative_l2_error", r.relative_l2_error}};
            emit(j.dump(2) + "\n", vf_out);
        }
    } catch (const tia::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const tia::FormatError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const tia::DivergedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
