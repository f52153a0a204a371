#include "polysed/model_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "polysed/feature_io.hpp"

namespace polysed {
namespace {
constexpr const char* kMagic = "POLYSED-MODEL v1";
}

void write_model(std::ostream& os, const BlstmNetwork& net) {
  nlohmann::json meta;
  meta["arch"] = {{"n_bands", net.arch.n_bands},
                  {"cells_per_layer", net.arch.cells_per_layer},
                  {"n_classes", net.arch.n_classes}};
  meta["classes"] = net.classes.names;
  meta["config"] = net.config_snapshot;
  meta["normalizer_bands"] = net.normalizer.n_bands();
  auto tensors = nlohmann::json::array();
  const auto names = net.params.tensor_names();
  const auto views = net.params.tensors();
  for (std::size_t k = 0; k < views.size(); ++k) tensors.push_back({{"name", names[k]}, {"size", views[k].size()}});
  meta["tensors"] = tensors;
  const std::string text = meta.dump();

  os << kMagic << '\n' << "meta " << text.size() << '\n' << text;
  write_f64(os, net.normalizer.means.data(), static_cast<std::size_t>(net.normalizer.means.size()));
  write_f64(os, net.normalizer.std_devs.data(), static_cast<std::size_t>(net.normalizer.std_devs.size()));
  for (auto v : views) write_f64(os, v.data(), v.size());
  if (!os) throw InvalidInput("failed writing model");
}

BlstmNetwork read_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw InvalidInput("not a POLYSED-MODEL v1 stream");
  if (!std::getline(is, line) || line.rfind("meta ", 0) != 0) throw InvalidInput("model: missing meta block");
  const auto meta_len = std::stoull(line.substr(5));
  std::string text(meta_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(meta_len));
  if (static_cast<std::size_t>(is.gcount()) != meta_len) throw InvalidInput("model: truncated meta block");

  BlstmNetwork net;
  try {
    const auto meta = nlohmann::json::parse(text);
    net.arch.n_bands = meta.at("arch").at("n_bands").get<std::size_t>();
    net.arch.cells_per_layer = meta.at("arch").at("cells_per_layer").get<std::vector<std::size_t>>();
    net.arch.n_classes = meta.at("arch").at("n_classes").get<std::size_t>();
    net.classes.names = meta.at("classes").get<std::vector<std::string>>();
    net.config_snapshot = meta.at("config").get<std::string>();
    const auto bands = meta.at("normalizer_bands").get<Eigen::Index>();
    net.normalizer.means.resize(bands);
    net.normalizer.std_devs.resize(bands);
    net.params = NetworkParams::zeros(net.arch);
    const auto names = net.params.tensor_names();
    const auto views = net.params.tensors();
    const auto& listed = meta.at("tensors");
    if (listed.size() != views.size()) throw InvalidInput("model: tensor count does not match architecture");
    for (std::size_t k = 0; k < views.size(); ++k) {
      if (listed[k].at("name").get<std::string>() != names[k] ||
          listed[k].at("size").get<std::size_t>() != views[k].size()) {
        throw InvalidInput("model: tensor '" + names[k] + "' does not match architecture");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("model: malformed meta block: ") + e.what());
  }
  read_f64(is, net.normalizer.means.data(), static_cast<std::size_t>(net.normalizer.means.size()));
  read_f64(is, net.normalizer.std_devs.data(), static_cast<std::size_t>(net.normalizer.std_devs.size()));
  for (auto v : net.params.tensors()) read_f64(is, v.data(), v.size());
  return net;
}

void save_model(const std::filesystem::path& path, const BlstmNetwork& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path.string());
  write_model(os, net);
}

BlstmNetwork load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open " + path.string());
  return read_model(is);
}

}  // namespace polysed
