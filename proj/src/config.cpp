#include <isopoints/config.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace iso {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw PreconditionError("bad value for " + std::string(key) + ": " + std::string(v));
  return out;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw PreconditionError("bad value for " + std::string(key) + ": " + std::string(v));
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw PreconditionError("bad value for " + std::string(key) + ": " + std::string(v));
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto real = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_double(k, v); };
    };
    auto integer = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_int<int>(k, v); };
    };
    auto flag = [&](const char* name, auto member) {
      t[name] = [member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_bool(k, v); };
    };
#define S(field) [](RunConfig& c) -> auto& { return c.sampler.field; }
#define F(field) [](RunConfig& c) -> auto& { return c.fit.field; }
    real("diagonal", S(diagonal));
    real("tau0", S(tau0));
    real("eps_start", S(eps_start));
    real("eps_end", S(eps_end));
    integer("max_newton_iters", S(max_newton_iters));
    integer("K", S(K));
    real("sigma_p", S(sigma_p));
    real("alpha", S(alpha));
    integer("resample_rounds", S(resample_rounds));
    real("resample_stop_frac", S(resample_stop_frac));
    real("resample_cv_target", S(resample_cv_target));
    real("insert_cap_frac", S(insert_cap_frac));
    real("edge_lambda", S(edge_lambda));
    real("normal_sigma_deg", S(normal_sigma_deg));

    real("gamma_on", F(gamma_on));
    real("gamma_normal", F(gamma_normal));
    real("gamma_off", F(gamma_off));
    real("gamma_eik", F(gamma_eik));
    real("alpha_off", F(alpha_off));
    real("sigma_n", F(sigma_n));
    integer("warmup_iters", F(warmup_iters));
    integer("iso_update_period", F(iso_update_period));
    real("iso_init_subsample", F(iso_init_subsample));
    integer("iters", F(iters));
    integer("batch_size", F(batch_size));
    real("learning_rate", F(learning_rate));
    t["seed"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      c.fit.seed = parse_int<std::uint64_t>(k, v);
    };
    flag("outlier_weighting", F(outlier_weighting));
    flag("iso_losses", F(iso_losses));
    flag("psi_literal", F(psi_literal));
    flag("outlier_literal_min", F(outlier_literal_min));
    integer("width", F(width));
    integer("hidden_layers", F(hidden_layers));
    real("omega", F(omega));
    integer("pca_k", F(pca_k));
    flag("pca_filter", F(pca_filter));
    integer("iso_batch", F(iso_batch));
    integer("log_every", F(log_every));
#undef S
#undef F
    return t;
  }();
  return table;
}

}  // namespace

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Default: return "default";
    case Provenance::File: return "file";
    case Provenance::Flag: return "flag";
  }
  return "?";
}

void RunConfig::set(std::string_view key, std::string_view value, Provenance source) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw PreconditionError("unknown config key: " + std::string(key));
  if (source == Provenance::File && provenance(key) == Provenance::Flag) return;
  it->second(*this, key, trim(value));
  provenance_[std::string(key)] = source;
}

void RunConfig::load_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw PreconditionError("config line " + std::to_string(lineno) + ": expected key = value");
    set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)), Provenance::File);
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  load_text(ss.str());
}

Provenance RunConfig::provenance(std::string_view key) const {
  const auto it = provenance_.find(key);
  return it == provenance_.end() ? Provenance::Default : it->second;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : setters()) out.push_back(k);
  return out;
}

}  // namespace iso
