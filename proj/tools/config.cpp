#include "cli.hpp"

#include "syncog/hash.hpp"
#include "syncog/text.hpp"

#include <cstdlib>

#include <fmt/format.h>

namespace syncog::cli {

using nlohmann::json;

namespace {

constexpr const char* kDefaultStimulus =
    "A kitchen scene. A woman stands at the sink drying a plate while the sink overflows and water spills "
    "onto the floor. Behind her a boy stands on a wobbling stool, reaching into a cookie jar on a high "
    "shelf, and hands a cookie to a girl who reaches up for it. A window with curtains looks out on a garden.";

std::string interpolate(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, 2, "${") == 0) {
      const auto close = s.find('}', i + 2);
      if (close == std::string::npos) throw ConfigError("unterminated ${ in config string: " + s);
      const auto name = s.substr(i + 2, close - i - 2);
      const char* value = std::getenv(name.c_str());
      if (!value) throw ConfigError(fmt::format("environment variable {} is not set", name));
      out += value;
      i = close + 1;
    } else {
      out += s[i++];
    }
  }
  return out;
}

EndpointSetting endpoint_setting(const json& root, const char* name, bool force_stub) {
  EndpointSetting e;
  const json j = root.contains("endpoints") && root.at("endpoints").contains(name) ? root.at("endpoints").at(name)
                                                                                   : json::object();
  e.stub = force_stub || j.value("stub", true);
  e.endpoint = services::endpoint_from_json(j);
  e.fixtures_dir = j.value("fixtures_dir", std::string());
  e.record_dir = j.value("record_dir", std::string());
  if (!e.stub) {
    if (e.endpoint.base_url.empty() && e.fixtures_dir.empty())
      throw ConfigError(fmt::format("endpoint '{}' is live but has no base_url", name));
    if (e.endpoint.base_url.empty()) e.endpoint.base_url = "http://fixtures.invalid";
    e.endpoint.validate();
  }
  return e;
}

}  // namespace

json interpolate_env(const json& j) {
  if (j.is_string()) return interpolate(j.get<std::string>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(interpolate_env(v));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = interpolate_env(v);
    return out;
  }
  return j;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const Overrides& ov) {
  json root = json::object();
  std::filesystem::path base = std::filesystem::current_path();
  if (path) {
    try {
      root = json::parse(text::read_file(path->string()));
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", path->string(), e.what()));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    root = interpolate_env(root);
    base = std::filesystem::absolute(*path).parent_path();
  }
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  RunConfig c;
  try {
    c.language = parse_language(root.value("language", std::string("en")));
    c.scheme = parse_scheme(root.value("scheme", std::string("ternary")));
    c.master_seed = root.value("master_seed", std::uint64_t{42});
    if (ov.seed) c.master_seed = *ov.seed;
    c.run_dir = ov.run_dir ? *ov.run_dir : resolve(root.value("run_dir", std::string("run")));
    c.lexicon_dir = root.contains("lexicon_dir") ? resolve(root.at("lexicon_dir").get<std::string>())
                                                 : std::filesystem::path(SYNCOG_DATA_DIR) / "lexicons";
    c.template_dir = root.contains("template_dir") ? resolve(root.at("template_dir").get<std::string>())
                                                   : std::filesystem::path(SYNCOG_DATA_DIR) / "templates";
    c.timbre_dir = resolve(root.value("timbre_dir", std::string()));
    c.stimulus = root.value("stimulus", std::string(kDefaultStimulus));
    c.cohort_id = root.value("cohort_id", c.cohort_id);

    json cohort = root.value("cohort", json::object());
    cohort["scheme"] = std::string(to_string(c.scheme));
    cohort["language"] = std::string(to_string(c.language));
    cohort["master_seed"] = c.master_seed;
    if (!cohort.contains("counts")) {
      cohort["counts"] = c.scheme == LabelScheme::Ternary ? json{{"HC", 20}, {"MCI", 20}, {"AD", 20}}
                                                          : json{{"NonAD", 30}, {"AD", 30}};
    }
    c.cohort = persona::cohort_spec_from_json(cohort);
    c.sampler = persona::sampler_params_from_json(root.value("sampler", json::object()));

    const json pol = root.value("policy", json::object());
    c.policy.max_retries = pol.value("max_retries", 4);
    c.policy.keep_best_on_exhaustion = pol.value("keep_best_on_exhaustion", true);
    c.policy.failure_threshold = pol.value("failure_threshold", 0.10);

    c.generator = endpoint_setting(root, "generator", ov.stub);
    c.tts = endpoint_setting(root, "tts", ov.stub);
    c.asr = endpoint_setting(root, "asr", ov.stub);
    c.eval = endpoint_setting(root, "eval", ov.stub);
    c.distill = endpoint_setting(root, "distill", ov.stub);
    // Stub narratives hit every band exactly; live generators are held to 4 of 5.
    c.policy.validation.min_matching_dims = pol.value("min_matching_dims", c.generator.stub ? 5 : 4);
    c.policy.validation.max_retries = c.policy.max_retries;
    c.policy.validate();

    const json dec = root.value("decode", json::object());
    c.synthesis_decode = services::decode_from_json(dec.value("synthesis", json::object()), c.synthesis_decode);
    c.eval_decode = services::decode_from_json(dec.value("evaluation", json::object()), c.eval_decode);
    c.distill_decode = services::decode_from_json(dec.value("distillation", json::object()), c.distill_decode);

    const json ev = root.value("eval", json::object());
    c.n_rollouts = ev.value("n_rollouts", 8);
    c.eval_attach_audio = ev.value("attach_audio", false);
    c.stub_classifier = ev.value("stub_classifier", std::string("rubric"));
    c.stub_noise = ev.value("stub_noise", 0.0);
    if (c.n_rollouts < 1) throw ConfigError("eval.n_rollouts must be >= 1");
    if (c.stub_classifier != "rubric" && c.stub_classifier != "oracle")
      throw ConfigError("eval.stub_classifier must be 'rubric' or 'oracle'");
    c.distill_attach_audio = root.value("distill", json::object()).value("attach_audio", false);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }

  for (const auto& [what, dir] : {std::pair{"lexicon_dir", c.lexicon_dir}, std::pair{"template_dir", c.template_dir}})
    if (!std::filesystem::is_directory(dir)) throw ConfigError(fmt::format("{} {} does not exist", what, dir.string()));
  if (!c.timbre_dir.empty() && !std::filesystem::is_directory(c.timbre_dir))
    throw ConfigError(fmt::format("timbre_dir {} does not exist", c.timbre_dir.string()));

  auto endpoint_json = [](const EndpointSetting& e) {
    json j = services::to_json(e.endpoint);
    j["stub"] = e.stub;
    if (!e.fixtures_dir.empty()) j["fixtures_dir"] = e.fixtures_dir;
    return j;
  };
  c.resolved = {{"language", to_string(c.language)},
                {"scheme", to_string(c.scheme)},
                {"master_seed", c.master_seed},
                {"lexicon_dir", c.lexicon_dir.filename().string()},
                {"template_dir", c.template_dir.filename().string()},
                {"stimulus", c.stimulus},
                {"cohort_id", c.cohort_id},
                {"cohort", persona::to_json(c.cohort)},
                {"sampler", persona::to_json(c.sampler)},
                {"policy",
                 {{"max_retries", c.policy.max_retries},
                  {"min_matching_dims", c.policy.validation.min_matching_dims},
                  {"keep_best_on_exhaustion", c.policy.keep_best_on_exhaustion},
                  {"failure_threshold", c.policy.failure_threshold}}},
                {"endpoints",
                 {{"generator", endpoint_json(c.generator)},
                  {"tts", endpoint_json(c.tts)},
                  {"asr", endpoint_json(c.asr)},
                  {"eval", endpoint_json(c.eval)},
                  {"distill", endpoint_json(c.distill)}}},
                {"decode",
                 {{"synthesis", services::to_json(c.synthesis_decode)},
                  {"evaluation", services::to_json(c.eval_decode)},
                  {"distillation", services::to_json(c.distill_decode)}}},
                {"eval",
                 {{"n_rollouts", c.n_rollouts},
                  {"attach_audio", c.eval_attach_audio},
                  {"stub_classifier", c.stub_classifier},
                  {"stub_noise", c.stub_noise}}}};
  c.hash = sha256_hex(c.resolved.dump());
  return c;
}

}  // namespace syncog::cli
