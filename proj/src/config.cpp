#include "bst/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "bst/error.hpp"

namespace bst {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_ident(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

std::string where(const std::string& source, std::size_t line) {
  return line ? source + ":" + std::to_string(line) : source + " (override)";
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
  ConfigFile cf;
  cf.source_ = source;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where(source, line) + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_ident(section)) throw ConfigError(where(source, line) + ": bad section name '" + section + "'");
      cf.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where(source, line) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError(where(source, line) + ": key '" + key + "' outside any section");
    if (!valid_ident(key)) throw ConfigError(where(source, line) + ": bad key '" + key + "'");
    auto& sec = cf.sections_[section];
    if (sec.count(key)) {
      throw ConfigError(where(source, line) + ": duplicate key '" + section + "." + key + "' (first on line " +
                        std::to_string(sec[key].line) + ")");
    }
    sec[key] = {std::move(value), line};
  }
  return cf;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path);
}

void ConfigFile::set_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  if (!valid_ident(section) || !valid_ident(key)) throw ConfigError("override '" + assignment + "' has a bad name");
  set(section, key, trim(assignment.substr(eq + 1)));
}

void ConfigFile::set(const std::string& section, const std::string& key, std::string value) {
  sections_[section][key] = {std::move(value), 0};
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

// --- typed view -----------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(const ConfigFile& f) : f_(f) {}

  template <typename T, typename Fn>
  void get(const std::string& section, const std::string& key, T& out, Fn convert) {
    used_.emplace_back(section, key);
    const auto* e = f_.find(section, key);
    if (!e) return;
    try {
      out = convert(e->value);
    } catch (const Error& err) {
      throw ConfigError(where(f_.source(), e->line) + ": " + section + "." + key + ": " + err.what());
    }
  }

  void size(const std::string& s, const std::string& k, std::size_t& out, std::size_t min = 0) {
    get(s, k, out, [min](const std::string& v) { return to_size(v, min); });
  }
  void real(const std::string& s, const std::string& k, float& out) {
    get(s, k, out, [](const std::string& v) { return static_cast<float>(to_double(v)); });
  }
  void text(const std::string& s, const std::string& k, std::string& out) {
    get(s, k, out, [](const std::string& v) { return v; });
  }

  const ConfigFile::Entry* entry(const std::string& s, const std::string& k) {
    used_.emplace_back(s, k);
    return f_.find(s, k);
  }

  void reject_unknown() const {
    for (const auto& [sec, keys] : f_.sections()) {
      for (const auto& [key, e] : keys) {
        bool known = false;
        for (const auto& u : used_) known = known || (u.first == sec && u.second == key);
        if (!known) throw ConfigError(where(f_.source(), e.line) + ": unknown key '" + sec + "." + key + "'");
      }
    }
  }

  [[noreturn]] void fail(const ConfigFile::Entry* e, const std::string& msg) const {
    throw ConfigError(where(f_.source(), e ? e->line : 0) + ": " + msg);
  }

  static std::size_t to_size(const std::string& v, std::size_t min) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw InvalidArgument("expected a non-negative integer, got '" + v + "'");
    if (out < min) throw InvalidArgument("must be >= " + std::to_string(min));
    return static_cast<std::size_t>(out);
  }
  static double to_double(const std::string& v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw InvalidArgument("expected a number, got '" + v + "'");
    return out;
  }

 private:
  const ConfigFile& f_;
  std::vector<std::pair<std::string, std::string>> used_;
};

// Shortest text that reads back to the same value.
template <typename T>
std::string fmt(T v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace

RunConfig run_config_from(const ConfigFile& f) {
  RunConfig rc;
  Reader r(f);
  auto& m = rc.model;

  if (const auto* e = r.entry("model", "image")) {
    auto dims = parse_size_list(e->value, "model.image");
    if (dims.size() != 3) r.fail(e, "model.image must be C,H,W");
    m.channels = dims[0];
    m.height = dims[1];
    m.width = dims[2];
  }
  r.size("model", "patch_size", m.patch_size, 1);
  r.size("model", "hidden_dim", m.hidden_dim, 1);
  r.size("model", "mlp_ratio", m.mlp_ratio, 1);
  r.size("model", "depth", m.depth, 0);
  r.size("model", "num_classes", m.num_classes, 1);
  r.real("model", "layerscale_init", m.layerscale_init);

  std::string mode = "sparse";
  r.text("prune", "mode", mode);
  const auto* s_entry = r.entry("prune", "sparsity");
  const auto* b_entry = r.entry("prune", "block");
  if (mode == "dense") {
    // sparsity/block, if present, are ignored so a sparse file can be forced dense by override
  } else if (mode == "sparse") {
    if (s_entry || b_entry) {
      if (!s_entry || !b_entry) r.fail(s_entry ? s_entry : b_entry, "prune needs both sparsity and block");
      PruneConfig pc;
      try {
        pc.sparsity = Reader::to_double(s_entry->value);
        pc.block_cols = Reader::to_size(b_entry->value, 1);
        validate_prune_config(pc);
      } catch (const Error& err) {
        r.fail(s_entry, std::string("prune: ") + err.what());
      }
      m.prune = pc;
    }
  } else {
    r.fail(f.find("prune", "mode"), "prune.mode must be dense or sparse, got '" + mode + "'");
  }

  auto& o = rc.optim;
  r.text("optim", "name", o.name);
  if (o.name != "sgd" && o.name != "adam") r.fail(f.find("optim", "name"), "optim.name must be sgd or adam");
  if (o.name == "adam") {
    o.lr = 1e-3f;
    o.momentum = 0.0f;
  }
  r.real("optim", "lr", o.lr);
  r.real("optim", "momentum", o.momentum);
  r.real("optim", "weight_decay", o.weight_decay);
  r.text("optim", "schedule", o.schedule);
  if (!(o.lr > 0.0f)) r.fail(f.find("optim", "lr"), "optim.lr must be positive");
  if (o.schedule != "constant" && o.schedule != "cosine") {
    r.fail(f.find("optim", "schedule"), "optim.schedule must be constant or cosine");
  }

  auto& t = rc.train;
  r.size("train", "epochs", t.epochs, 1);
  r.size("train", "batch_size", t.batch_size, 1);
  std::size_t seed = t.seed;
  r.size("train", "seed", seed, 0);
  t.seed = seed;

  auto& d = rc.data;
  r.text("data", "source", d.source);
  r.text("data", "path", d.path);
  r.size("data", "train_samples", d.train_samples, 1);
  r.size("data", "test_samples", d.test_samples, 1);
  r.real("data", "noise", d.noise);
  r.size("data", "blobs_per_class", d.blobs_per_class, 1);
  if (d.source != "synthetic" && d.source != "cifar10" && d.source != "cifar100") {
    r.fail(f.find("data", "source"), "data.source must be synthetic, cifar10 or cifar100");
  }
  if (d.source != "synthetic" && d.path.empty()) r.fail(f.find("data", "source"), "data.path required for " + d.source);

  r.reject_unknown();
  try {
    validate_model_config(m);
  } catch (const Error& err) {
    throw ConfigError(f.source() + ": " + err.what());
  }
  return rc;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  auto f = ConfigFile::load(path);
  for (const auto& o : overrides) f.set_override(o);
  return run_config_from(f);
}

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides) {
  auto f = ConfigFile::parse(text);
  for (const auto& o : overrides) f.set_override(o);
  return run_config_from(f);
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  const auto& m = model;
  os << "model.image=" << m.channels << ',' << m.height << ',' << m.width << ";model.patch_size=" << m.patch_size
     << ";model.hidden_dim=" << m.hidden_dim << ";model.mlp_ratio=" << m.mlp_ratio << ";model.depth=" << m.depth
     << ";model.num_classes=" << m.num_classes << ";model.layerscale_init=" << fmt(m.layerscale_init);
  if (m.prune) {
    os << ";prune.sparsity=" << fmt(m.prune->sparsity) << ";prune.block=" << m.prune->block_cols;
  } else {
    os << ";prune.mode=dense";
  }
  os << ";optim.name=" << optim.name << ";optim.lr=" << fmt(optim.lr) << ";optim.momentum=" << fmt(optim.momentum)
     << ";optim.weight_decay=" << fmt(optim.weight_decay) << ";optim.schedule=" << optim.schedule;
  os << ";train.epochs=" << train.epochs << ";train.batch_size=" << train.batch_size << ";train.seed=" << train.seed;
  os << ";data.source=" << data.source;
  if (!data.path.empty()) os << ";data.path=" << data.path;
  if (data.source == "synthetic") {
    os << ";data.train_samples=" << data.train_samples << ";data.test_samples=" << data.test_samples
       << ";data.noise=" << fmt(data.noise) << ";data.blobs_per_class=" << data.blobs_per_class;
  }
  return os.str();
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    try {
      out.push_back(Reader::to_double(item));
    } catch (const Error&) {
      throw InvalidArgument(what + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw InvalidArgument(what + ": empty list");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    try {
      out.push_back(Reader::to_size(item, 0));
    } catch (const Error&) {
      throw InvalidArgument(what + ": '" + item + "' is not a non-negative integer");
    }
  }
  if (out.empty()) throw InvalidArgument(what + ": empty list");
  return out;
}

}  // namespace bst
