#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tiattack/errors.hpp"
#include "tiattack/io.hpp"
#include "tiattack/models.hpp"

namespace tia {

namespace {

constexpr const char* kManifest = "manifest.txt";

std::vector<NamedTensor> parameters_of(const Classifier& model) {
    if (const auto* cnn = dynamic_cast<const TinyCnn*>(&model)) return cnn->named_parameters();
    if (const auto* lin = dynamic_cast<const LinearSumModel*>(&model)) {
        const int k = lin->num_classes();
        return {{"weights", Tensor(Shape{1, 1, 1, k}, lin->weights())},
                {"biases", Tensor(Shape{1, 1, 1, k}, lin->biases())}};
    }
    throw std::invalid_argument("save_model: architecture '" + model.arch() + "' is not serializable");
}

}  // namespace

void save_model(const Classifier& model, const std::filesystem::path& dir) {
    auto params = parameters_of(model);
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / kManifest);
    if (!manifest) throw std::runtime_error("save_model: cannot write " + (dir / kManifest).string());
    const InputShape in = model.input_shape();
    manifest << "arch " << model.arch() << '\n'
             << "num_classes " << model.num_classes() << '\n'
             << "input " << in.c << ' ' << in.h << ' ' << in.w << '\n';
    for (const auto& p : params) {
        const Shape& s = p.value.shape();
        const std::string file = p.name + ".npy";
        manifest << "param " << p.name << ' ' << s.n << ' ' << s.c << ' ' << s.h << ' ' << s.w << ' ' << file << '\n';
        write_npy(dir / file, p.value);
    }
}

ClassifierPtr load_model(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / kManifest);
    if (!manifest) throw ConfigError("load_model: no manifest in " + dir.string());

    std::string arch;
    int num_classes = 0;
    InputShape input;
    std::map<std::string, Tensor> named;
    std::string line;
    while (std::getline(manifest, line)) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "arch") {
            ls >> arch;
        } else if (key == "num_classes") {
            ls >> num_classes;
        } else if (key == "input") {
            ls >> input.c >> input.h >> input.w;
        } else if (key == "param") {
            std::string name, file;
            Shape s;
            ls >> name >> s.n >> s.c >> s.h >> s.w >> file;
            if (!ls) throw ConfigError("load_model: malformed manifest line '" + line + "'");
            Tensor t = read_npy_tensor(dir / file);
            if (t.shape() != s) {
                throw ConfigError("load_model: " + file + " has shape " + t.shape().str() + ", manifest says " + s.str());
            }
            named.emplace(name, std::move(t));
        } else {
            throw ConfigError("load_model: unknown manifest key '" + key + "'");
        }
    }

    if (arch == "tiny_cnn") {
        return std::make_shared<TinyCnn>(TinyCnn::from_named(num_classes, input, named));
    }
    if (arch == "linear_sum") {
        auto w = named.find("weights");
        auto b = named.find("biases");
        if (w == named.end() || b == named.end()) throw ConfigError("load_model: linear_sum needs weights and biases");
        std::vector<double> wv(w->second.values().begin(), w->second.values().end());
        std::vector<double> bv(b->second.values().begin(), b->second.values().end());
        return std::make_shared<LinearSumModel>(std::move(wv), std::move(bv), input);
    }
    throw ConfigError("load_model: unknown architecture '" + arch + "' in " + dir.string());
}

}  // namespace tia
