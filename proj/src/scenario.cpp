#include "delaylab/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>

#include "delaylab/spectral.hpp"
#include "json.hpp"

namespace delaylab {

namespace {

using nlohmann::json;

void allow_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + " is missing \"" + key + "\"");
  return obj.at(key);
}

double number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ConfigError(what + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(what + " must be finite");
  return x;
}

std::size_t count(const json& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(what + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

/// Profile as a function of age; arrays are only valid on the model grid.
struct Profile {
  std::function<double(double)> f;
  std::optional<Vector> nodes;
};

Profile parse_profile(const json& v, const std::string& what) {
  if (v.is_number()) {
    const double c = number(v, what);
    return {[c](double) { return c; }, std::nullopt};
  }
  if (v.is_array()) {
    Vector nodes;
    for (const auto& x : v) nodes.push_back(number(x, what + " entry"));
    return {nullptr, std::move(nodes)};
  }
  if (v.is_object()) {
    allow_keys(v, what, {"exponential"});
    const json& e = require(v, "exponential", what);
    allow_keys(e, what + ".exponential", {"scale", "rate"});
    const double scale = number(require(e, "scale", what + ".exponential"), what + ".scale");
    const double rate = number(require(e, "rate", what + ".exponential"), what + ".rate");
    return {[scale, rate](double a) { return scale * std::exp(rate * a); }, std::nullopt};
  }
  throw ConfigError(what + " must be a number, an array or {\"exponential\": ...}");
}

Vector on_grid(const Profile& p, double a_max, std::size_t n_age,
               const std::string& what) {
  if (p.nodes) {
    if (p.nodes->size() != n_age + 1) {
      throw ConfigError(what + " array has " + std::to_string(p.nodes->size()) +
                        " entries, expected n_age + 1 = " + std::to_string(n_age + 1));
    }
    return *p.nodes;
  }
  return sample_ages(a_max, n_age, p.f);
}

HistoryFunction parse_history(const json* v, double a_max, std::size_t n_age) {
  if (!v) return [](double, double a) { return std::exp(-a); };
  allow_keys(*v, "model.history", {"profile", "time_rate"});
  double rate = 0.0;
  if (v->contains("time_rate")) rate = number(v->at("time_rate"), "model.history.time_rate");
  Profile p{[](double a) { return std::exp(-a); }, std::nullopt};
  if (v->contains("profile")) p = parse_profile(v->at("profile"), "model.history.profile");
  if (p.nodes) {
    const Vector nodes = on_grid(p, a_max, n_age, "model.history.profile");
    const double da = a_max / static_cast<double>(n_age);
    return [nodes, da, rate](double s, double a) {
      const auto j = static_cast<std::size_t>(std::llround(a / da));
      return nodes[std::min(j, nodes.size() - 1)] * std::exp(rate * s);
    };
  }
  return [f = p.f, rate](double s, double a) { return f(a) * std::exp(rate * s); };
}

HarvestInput parse_q(const json& v, double a_max, std::size_t n_age, double r) {
  if (!v.is_object()) throw ConfigError("harvest.q must be a JSON object");
  if (v.contains("table")) {
    allow_keys(v, "harvest.q", {"table"});
    const json& t = v.at("table");
    allow_keys(t, "harvest.q.table", {"dt", "values"});
    const double h = number(require(t, "dt", "harvest.q.table"), "harvest.q.table.dt");
    if (!(h > 0.0)) throw ConfigError("harvest.q.table.dt must be positive");
    const json& rows = require(t, "values", "harvest.q.table");
    if (!rows.is_array() || rows.empty()) {
      throw ConfigError("harvest.q.table.values must be a nonempty array of rows");
    }
    auto table = std::make_shared<std::vector<Vector>>();
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != n_age + 1) {
        throw ConfigError("each harvest.q.table row needs n_age + 1 entries");
      }
      Vector values;
      for (const auto& x : row) values.push_back(number(x, "harvest.q.table entry"));
      table->push_back(std::move(values));
    }
    return [table, h, r](double t, std::span<double> out) {
      const double pos = (t + r) / h;
      const auto last = static_cast<double>(table->size() - 1);
      if (pos < 0.0 || pos > last) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
      }
      const auto i = std::min(static_cast<std::size_t>(pos), table->size() - 1);
      const double frac = pos - static_cast<double>(i);
      const Vector& lo = (*table)[i];
      const Vector& hi = (*table)[std::min(i + 1, table->size() - 1)];
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = (1.0 - frac) * lo[j] + frac * hi[j];
    };
  }
  allow_keys(v, "harvest.q", {"time", "age"});
  double c = 1.0, amp = 0.0, freq = 0.0, phase = 0.0;
  if (v.contains("time")) {
    const json& t = v.at("time");
    allow_keys(t, "harvest.q.time", {"constant", "amplitude", "frequency", "phase"});
    if (t.contains("constant")) c = number(t.at("constant"), "harvest.q.time.constant");
    if (t.contains("amplitude")) amp = number(t.at("amplitude"), "harvest.q.time.amplitude");
    if (t.contains("frequency")) freq = number(t.at("frequency"), "harvest.q.time.frequency");
    if (t.contains("phase")) phase = number(t.at("phase"), "harvest.q.time.phase");
  }
  const Vector age = on_grid(parse_profile(require(v, "age", "harvest.q"), "harvest.q.age"),
                             a_max, n_age, "harvest.q.age");
  return [age, c, amp, freq, phase](double t, std::span<double> out) {
    const double s = c + amp * std::sin(freq * t + phase);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = s * age[j];
  };
}

Scenario build(const json& doc) {
  allow_keys(doc, "scenario", {"model", "run", "harvest", "seed"});
  const json& m = require(doc, "model", "scenario");
  allow_keys(m, "model", {"a_max", "n_age", "dt", "delay", "mu", "alpha", "mu_inf",
                          "birth", "history"});
  ModelSpec spec;
  spec.a_max = number(require(m, "a_max", "model"), "model.a_max");
  spec.n_age = count(require(m, "n_age", "model"), "model.n_age");
  if (spec.n_age == 0) throw ConfigError("model.n_age must be at least 1");
  if (spec.n_age > 10'000'000) throw ConfigError("model.n_age exceeds 10^7");
  if (!(spec.a_max > 0.0)) throw ConfigError("model.a_max must be positive");
  if (m.contains("dt")) spec.dt = number(m.at("dt"), "model.dt");
  if (m.contains("delay")) spec.r = number(m.at("delay"), "model.delay");
  if (spec.r < 0.0) throw ConfigError("model.delay must be nonnegative");
  if (spec.r / spec.a_max * static_cast<double>(spec.n_age + 1) *
          static_cast<double>(spec.n_age + 1) > 2e8) {
    throw ConfigError("delay history would hold more than 2·10^8 values");
  }
  const double a_max = spec.a_max;
  const std::size_t n_age = spec.n_age;
  spec.mu = on_grid(parse_profile(require(m, "mu", "model"), "model.mu"), a_max, n_age, "model.mu");
  spec.alpha = m.contains("alpha")
                   ? on_grid(parse_profile(m.at("alpha"), "model.alpha"), a_max, n_age, "model.alpha")
                   : Vector(n_age + 1, 0.0);
  if (m.contains("mu_inf")) spec.mu_inf = number(m.at("mu_inf"), "model.mu_inf");

  const json& b = require(m, "birth", "model");
  allow_keys(b, "model.birth", {"law", "beta", "critical"});
  const json& law = require(b, "law", "model.birth");
  if (!law.is_string() || (law != "B1" && law != "B2")) {
    throw ConfigError("model.birth.law must be \"B1\" or \"B2\"");
  }
  const json& beta = require(b, "beta", "model.birth");
  if (law == "B2") {
    spec.law = BirthLaw::point;
    spec.beta2 = on_grid(parse_profile(beta, "model.birth.beta"), a_max, n_age, "model.birth.beta");
  } else {
    spec.law = BirthLaw::distributed;
    const double da = a_max / static_cast<double>(n_age);
    const auto slots = static_cast<std::size_t>(std::llround(spec.r / da)) + 1;
    if (beta.is_object() && beta.contains("table")) {
      allow_keys(beta, "model.birth.beta", {"table"});
      const json& rows = beta.at("table");
      if (!rows.is_array() || rows.size() != slots) {
        throw ConfigError("model.birth.beta.table needs r/dt + 1 = " + std::to_string(slots) +
                          " rows");
      }
      spec.beta1 = Matrix(slots, n_age + 1);
      for (std::size_t d = 0; d < slots; ++d) {
        const Vector row = on_grid(parse_profile(rows[d], "model.birth.beta.table row"),
                                   a_max, n_age, "model.birth.beta.table row");
        std::copy(row.begin(), row.end(), spec.beta1.row(d).begin());
      }
    } else {
      const Vector row =
          on_grid(parse_profile(beta, "model.birth.beta"), a_max, n_age, "model.birth.beta");
      spec.beta1 = Matrix(slots, n_age + 1);
      for (std::size_t d = 0; d < slots; ++d) {
        std::copy(row.begin(), row.end(), spec.beta1.row(d).begin());
      }
    }
  }

  std::optional<HarvestInput> harvest;
  if (doc.contains("harvest")) {
    const json& h = doc.at("harvest");
    allow_keys(h, "harvest", {"eta", "q"});
    spec.eta = on_grid(parse_profile(require(h, "eta", "harvest"), "harvest.eta"), a_max,
                       n_age, "harvest.eta");
    if (h.contains("q")) harvest = parse_q(h.at("q"), a_max, n_age, spec.r);
  }

  AgePopulationModel model = build_model(spec);
  if (b.contains("critical")) {
    if (!b.at("critical").is_boolean()) throw ConfigError("model.birth.critical must be a boolean");
    if (b.at("critical").get<bool>()) {
      const double c = critical_birth_scale(model);
      for (double& x : spec.beta2) x *= c;
      spec.beta1 *= c;
      model = build_model(spec);
    }
  }

  HistoryFunction history =
      parse_history(m.contains("history") ? &m.at("history") : nullptr, a_max, n_age);

  const json& run = require(doc, "run", "scenario");
  allow_keys(run, "run", {"t_max", "discard_fraction", "snapshot_stride"});
  Scenario s{std::move(model), std::move(history), std::move(harvest),
             number(require(run, "t_max", "run"), "run.t_max"), 0.5, 0, 0};
  if (run.contains("discard_fraction")) {
    s.discard_fraction = number(run.at("discard_fraction"), "run.discard_fraction");
    if (!(s.discard_fraction >= 0.0 && s.discard_fraction < 1.0)) {
      throw ConfigError("run.discard_fraction must lie in [0, 1)");
    }
  }
  if (run.contains("snapshot_stride")) {
    s.snapshot_stride = count(run.at("snapshot_stride"), "run.snapshot_stride");
  }
  if (!(s.t_max > s.model.r())) throw ConfigError("run.t_max must exceed the delay");
  if (doc.contains("seed")) s.seed = count(doc.at("seed"), "seed");
  return s;
}

}  // namespace

Scenario parse_scenario(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  try {
    return build(doc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario has a malformed value: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

}  // namespace delaylab
