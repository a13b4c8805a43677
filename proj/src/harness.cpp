#include "tiattack/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "tiattack/dataset.hpp"
#include "tiattack/errors.hpp"

namespace tia {

using nlohmann::json;

namespace {

std::string format_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

bool has_model(const std::filesystem::path& dir) { return std::filesystem::exists(dir / "manifest.txt"); }

int idx_count(const std::filesystem::path& labels_path) {
    std::ifstream in(labels_path, std::ios::binary);
    unsigned char hdr[8];
    if (!in.read(reinterpret_cast<char*>(hdr), 8)) throw ConfigError("cannot read IDX header of " + labels_path.string());
    return (hdr[4] << 24) | (hdr[5] << 16) | (hdr[6] << 8) | hdr[7];
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) && !j[key].is_null() ? j[key].get<T>() : fallback;
}

}  // namespace

// ---------------------------------------------------------------------------
// Attack config (de)serialization

json to_json(const AttackConfig& cfg) {
    json j;
    j["name"] = cfg.name();
    j["method"] = to_string(cfg.method);
    j["norm"] = to_string(cfg.norm);
    j["epsilon"] = cfg.epsilon;
    j["iterations"] = cfg.iterations;
    j["alpha"] = cfg.alpha;
    j["momentum"] = cfg.momentum;
    j["dim_prob"] = cfg.dim_prob;
    j["dim_resize_low"] = cfg.dim_resize_low;
    j["pixel_bounds"] = {cfg.pixel_min, cfg.pixel_max};
    j["seed"] = cfg.seed;
    if (cfg.kernel) {
        j["kernel"] = {{"kind", to_string(cfg.kernel->kind)}, {"k", cfg.kernel->half_width}};
    } else {
        j["kernel"] = nullptr;
    }
    return j;
}

AttackConfig attack_config_from_json(const json& j, InputShape input) {
    if (!j.is_object() || !j.contains("method")) throw ConfigError("attack entry needs a 'method'");
    AttackConfig cfg;
    try {
        const AttackMethod method = parse_method(j["method"].get<std::string>());
        const Norm norm = parse_norm(get_or<std::string>(j, "norm", "linf"));
        cfg = AttackConfig::defaults(method, norm, input);
        cfg.epsilon = get_or(j, "epsilon", cfg.epsilon);
        cfg.iterations = get_or(j, "iterations", cfg.iterations);
        cfg.alpha = get_or(j, "alpha", cfg.epsilon / cfg.iterations);
        cfg.momentum = get_or(j, "momentum", cfg.momentum);
        cfg.dim_prob = get_or(j, "dim_prob", cfg.dim_prob);
        cfg.dim_resize_low = get_or(j, "dim_resize_low", cfg.dim_resize_low);
        cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
        if (j.contains("kernel") && !j["kernel"].is_null()) {
            const json& kj = j["kernel"];
            cfg.kernel = make_kernel(parse_kernel_kind(get_or<std::string>(kj, "kind", "gaussian")),
                                     get_or(kj, "k", 7));
        }
        cfg = cfg.effective();
        cfg.validate();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed attack entry: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid attack entry: ") + e.what());
    }
    return cfg;
}

std::string config_digest(const AttackConfig& cfg) {
    const std::string text = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string kernel_label(const AttackConfig& cfg) {
    if (!cfg.kernel) return "none";
    return to_string(cfg.kernel->kind) + ":" + std::to_string(cfg.kernel->half_width);
}

// ---------------------------------------------------------------------------
// Plans

ExperimentPlan parse_plan(const json& j, const std::filesystem::path& base_dir) {
    ExperimentPlan plan;
    try {
        const json& data = j.at("dataset");
        plan.test_images = resolve(base_dir, data.at("test_images").get<std::string>());
        plan.test_labels = resolve(base_dir, data.at("test_labels").get<std::string>());
        if (data.contains("train_images")) plan.train_images = resolve(base_dir, data["train_images"].get<std::string>());
        if (data.contains("train_labels")) plan.train_labels = resolve(base_dir, data["train_labels"].get<std::string>());

        for (const json& m : j.at("models")) {
            ModelSpec spec;
            spec.id = m.at("id").get<std::string>();
            spec.path = resolve(base_dir, m.at("path").get<std::string>());
            if (m.contains("train")) {
                const json& t = m["train"];
                TrainConfig tc;
                tc.seed = get_or<std::uint64_t>(t, "seed", tc.seed);
                tc.epochs = get_or(t, "epochs", tc.epochs);
                tc.learning_rate = get_or(t, "lr", tc.learning_rate);
                tc.batch_size = get_or(t, "batch", tc.batch_size);
                tc.shift_augment = get_or(t, "shift_augment", tc.shift_augment);
                spec.train = tc;
            }
            plan.models.push_back(std::move(spec));
        }

        for (const json& s : j.at("sources")) {
            SourceSpec spec;
            if (s.is_string()) {
                spec.id = s.get<std::string>();
                spec.members = {spec.id};
            } else {
                spec.id = s.at("id").get<std::string>();
                spec.members = s.contains("members") ? s["members"].get<std::vector<std::string>>()
                                                     : std::vector<std::string>{spec.id};
                spec.weights = get_or(s, "weights", std::vector<double>{});
            }
            plan.sources.push_back(std::move(spec));
        }
        plan.targets = j.at("targets").get<std::vector<std::string>>();
        for (const json& a : j.at("attacks")) plan.attacks.push_back(a);

        plan.samples = get_or(j, "samples", plan.samples);
        plan.sample_offset = get_or(j, "sample_offset", plan.sample_offset);
        plan.filter_correct = get_or(j, "filter_correct", plan.filter_correct);
        plan.seed = get_or<std::uint64_t>(j, "seed", plan.seed);
        if (j.contains("output_dir")) {
            std::filesystem::path out(j["output_dir"].get<std::string>());
            if (out.is_relative()) {
                const char* root = std::getenv("TIA_OUTPUT_ROOT");
                out = (root && *root ? std::filesystem::path(root) : base_dir) / out;
            }
            plan.output_dir = out;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed plan: ") + e.what());
    }
    return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open plan " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("plan " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_plan(j, std::filesystem::absolute(path).parent_path());
}

void validate_plan(const ExperimentPlan& plan) {
    for (const auto& p : {plan.test_images, plan.test_labels}) {
        if (!std::filesystem::exists(p)) throw ConfigError("dataset file not found: " + p.string());
    }
    std::set<std::string> ids;
    for (const auto& m : plan.models) {
        if (!ids.insert(m.id).second) throw ConfigError("duplicate model id '" + m.id + "'");
        if (has_model(m.path)) continue;
        if (!m.train) throw ConfigError("model '" + m.id + "' not found at " + m.path.string() + " and has no train block");
        for (const auto& p : {plan.train_images, plan.train_labels}) {
            if (p.empty() || !std::filesystem::exists(p)) {
                throw ConfigError("model '" + m.id + "' needs training but training data is missing: " + p.string());
            }
        }
    }
    for (const auto& s : plan.sources) {
        for (const auto& m : s.members) {
            if (!ids.count(m)) throw ConfigError("source '" + s.id + "' references unknown model '" + m + "'");
        }
        if (!s.weights.empty() && s.weights.size() != s.members.size()) {
            throw ConfigError("source '" + s.id + "' needs one weight per member");
        }
    }
    for (const auto& t : plan.targets) {
        if (!ids.count(t)) throw ConfigError("unknown target model '" + t + "'");
    }
    if (plan.sources.empty() || plan.targets.empty() || plan.attacks.empty()) {
        throw ConfigError("plan needs at least one source, target and attack");
    }
    for (const auto& a : plan.attacks) attack_config_from_json(a, InputShape{});
    const int available = idx_count(plan.test_labels);
    if (plan.samples < 1 || plan.sample_offset < 0 || plan.sample_offset + plan.samples > available) {
        throw ConfigError("sample range [" + std::to_string(plan.sample_offset) + ", " +
                          std::to_string(plan.sample_offset + plan.samples) + ") exceeds dataset size " +
                          std::to_string(available));
    }
}

std::vector<std::pair<std::string, ClassifierPtr>> load_zoo(const ExperimentPlan& plan) {
    validate_plan(plan);
    std::vector<std::pair<std::string, ClassifierPtr>> zoo;
    std::optional<LabeledDataset> train_data;
    for (const auto& m : plan.models) {
        if (!has_model(m.path)) {
            if (!train_data) train_data = load_idx_dataset(plan.train_images, plan.train_labels);
            std::cerr << "training model '" << m.id << "' -> " << m.path.string() << '\n';
            TrainResult r = train_tiny_cnn(*train_data, *m.train);
            save_model(r.model, m.path);
        }
        zoo.emplace_back(m.id, load_model(m.path));
    }
    return zoo;
}

// ---------------------------------------------------------------------------
// Reports

const ReportRow& ExperimentReport::find(const std::string& source, const std::string& attack,
                                        const std::string& kernel, const std::string& target) const {
    for (const auto& r : rows) {
        if (r.source == source && r.attack == attack && r.kernel == kernel && r.target == target) return r;
    }
    throw std::out_of_range("no report row for " + source + "/" + attack + "/" + kernel + "/" + target);
}

std::string report_csv(const ExperimentReport& report) {
    std::ostringstream os;
    os << "source,attack,kernel,norm,target,n,success_rate\n";
    for (const auto& r : report.rows) {
        os << r.source << ',' << r.attack << ',' << r.kernel << ',' << r.norm << ',' << r.target << ',' << r.n << ','
           << format_rate(r.success_rate) << '\n';
    }
    return os.str();
}

json report_json(const ExperimentReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"source", r.source},
                        {"attack", r.attack},
                        {"kernel", r.kernel},
                        {"norm", r.norm},
                        {"target", r.target},
                        {"n", r.n},
                        {"success_rate", format_rate(r.success_rate)},
                        {"white_box", r.white_box},
                        {"config_digest", r.config_digest},
                        {"config", r.config}});
    }
    return {{"seed", report.seed},
            {"samples", report.samples},
            {"filter_correct", report.filter_correct},
            {"rows", rows},
            {"warnings", report.warnings}};
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
    csv << report_csv(report);
    std::ofstream js(dir / (stem + ".json"), std::ios::binary);
    js << report_json(report).dump(2) << '\n';
    if (!csv || !js) throw std::runtime_error("cannot write report into " + dir.string());
}

// ---------------------------------------------------------------------------
// Runner

namespace {

ExperimentReport run_grid(const ExperimentPlan& plan, const std::vector<json>& attacks) {
    validate_plan(plan);
    const LabeledDataset full = load_idx_dataset(plan.test_images, plan.test_labels);
    const LabeledDataset data = full.subset(plan.sample_offset, plan.samples);
    const InputShape input{data.images.shape().c, data.images.shape().h, data.images.shape().w};

    std::map<std::string, ClassifierPtr> zoo;
    for (auto& [id, model] : load_zoo(plan)) zoo.emplace(id, model);

    ExperimentReport report;
    report.seed = plan.seed;
    report.samples = plan.samples;
    report.filter_correct = plan.filter_correct;

    for (const auto& source : plan.sources) {
        std::vector<ClassifierPtr> members;
        for (const auto& m : source.members) members.push_back(zoo.at(m));
        ClassifierPtr model = source.weights.empty() ? fuse_logits(members) : fuse_logits(members, source.weights);

        Tensor images = data.images;
        std::vector<int> labels = data.labels;
        if (plan.filter_correct) {
            auto pred = predict(*model, data.images);
            std::vector<Tensor> kept;
            labels.clear();
            for (int i = 0; i < data.size(); ++i) {
                if (pred[i] == data.labels[i]) {
                    kept.push_back(data.images.image(i));
                    labels.push_back(data.labels[i]);
                }
            }
            images = concat_batch(kept);
        }

        for (const json& aj : attacks) {
            json with_seed = aj;
            if (!with_seed.contains("seed")) with_seed["seed"] = plan.seed;
            const AttackConfig cfg = attack_config_from_json(with_seed, input);
            const std::size_t first_row = report.rows.size();

            std::optional<AdversarialResult> result;
            if (!labels.empty()) result = attack(*model, images, labels, cfg);

            for (const auto& target : plan.targets) {
                ReportRow row;
                row.source = source.id;
                row.attack = aj.contains("name") ? aj["name"].get<std::string>() : cfg.name();
                row.kernel = kernel_label(cfg);
                row.norm = to_string(cfg.norm);
                row.target = target;
                row.n = static_cast<int>(labels.size());
                row.white_box = std::find(source.members.begin(), source.members.end(), target) != source.members.end();
                row.config_digest = config_digest(cfg);
                row.config = to_json(cfg);
                if (result) {
                    auto pred = predict(*zoo.at(target), result->x_adv);
                    int fooled = 0;
                    for (std::size_t i = 0; i < pred.size(); ++i) fooled += pred[i] != labels[i];
                    row.success_rate = static_cast<double>(fooled) / static_cast<double>(pred.size());
                }
                report.rows.push_back(std::move(row));
            }

            // White-box success should dominate transfer success for the same attack.
            double white = -1.0;
            for (std::size_t r = first_row; r < report.rows.size(); ++r)
                if (report.rows[r].white_box) white = std::max(white, report.rows[r].success_rate);
            if (white < 0.0) continue;
            for (std::size_t r = first_row; r < report.rows.size(); ++r) {
                const auto& row = report.rows[r];
                if (!row.white_box && row.success_rate > white) {
                    std::string msg = "black-box success on '" + row.target + "' (" + format_rate(row.success_rate) +
                                      ") exceeds white-box success (" + format_rate(white) + ") for " + row.source +
                                      "/" + row.attack + "/" + row.kernel;
                    std::cerr << "warning: " << msg << '\n';
                    report.warnings.push_back(std::move(msg));
                }
            }
        }
    }
    return report;
}

}  // namespace

ExperimentReport run_plan(const ExperimentPlan& plan) {
    ExperimentReport report = run_grid(plan, plan.attacks);
    if (!plan.output_dir.empty()) write_report(report, plan.output_dir, "report");
    return report;
}

ExperimentReport kernel_size_sweep(const ExperimentPlan& plan, std::vector<int> kernel_sizes) {
    std::vector<int> sizes;
    std::vector<std::string> warnings;
    for (int s : kernel_sizes) {
        if (s < 1 || s % 2 == 0) throw std::invalid_argument("kernel size " + std::to_string(s) + " must be odd and positive");
        if (std::find(sizes.begin(), sizes.end(), s) != sizes.end()) {
            warnings.push_back("duplicate kernel size " + std::to_string(s) + " ignored");
            std::cerr << "warning: " << warnings.back() << '\n';
            continue;
        }
        sizes.push_back(s);
    }

    std::vector<json> attacks;
    for (const json& base : plan.attacks) {
        std::string kind = "gaussian";
        if (base.contains("kernel") && !base["kernel"].is_null()) kind = get_or<std::string>(base["kernel"], "kind", kind);
        for (int s : sizes) {
            json a = base;
            a["kernel"] = {{"kind", kind}, {"k", (s - 1) / 2}};
            attacks.push_back(std::move(a));
        }
    }
    ExperimentReport report = run_grid(plan, attacks);
    report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
    if (!plan.output_dir.empty()) write_report(report, plan.output_dir, "sweep");
    return report;
}

}  // namespace tia
