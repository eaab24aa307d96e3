#include <istream>
#include <ostream>

#include <json.hpp>

#include "truelearn/error.hpp"
#include "truelearn/models.hpp"

namespace truelearn {

using nlohmann::json;

namespace {

constexpr std::string_view kSnapshotFormat = "truelearn-state";

json learner_to_json(const std::string& id, const LearnerState& s) {
  json skills = json::array();
  for (const auto& [kc, g] : s.gaussian.skills) {
    skills.push_back({{"kc_id", kc},
                      {"mean", g.belief.mean},
                      {"variance", g.belief.variance},
                      {"last_order", g.last_order}});
  }
  for (const auto& [kc, b] : s.bernoulli.skills) {
    skills.push_back({{"kc_id", kc}, {"pi", b.pi}, {"last_order", b.last_order}});
  }
  json j = {{"learner_id", id},
            {"skills", std::move(skills)},
            {"tracker", {{"engaged", s.tracker.engaged}, {"total", s.tracker.total}}}};
  j["last_label"] = s.last_label ? json(to_int(*s.last_label)) : json(nullptr);
  return j;
}

LearnerState learner_from_json(const json& j) {
  LearnerState s;
  for (const auto& sk : j.at("skills")) {
    const KcId kc = sk.at("kc_id").get<KcId>();
    const std::size_t last = sk.value("last_order", std::size_t{0});
    if (sk.contains("pi")) {
      s.bernoulli.skills[kc] = {sk.at("pi").get<double>(), last};
    } else {
      s.gaussian.skills[kc] = {
          {sk.at("mean").get<double>(), sk.at("variance").get<double>()}, last};
    }
  }
  const auto& tr = j.at("tracker");
  s.tracker.engaged = tr.at("engaged").get<std::size_t>();
  s.tracker.total = tr.at("total").get<std::size_t>();
  if (s.tracker.engaged > s.tracker.total) {
    throw DataError("tracker has more engaged than total events");
  }
  if (auto it = j.find("last_label"); it != j.end() && !it->is_null()) {
    s.last_label = label_from_int(it->get<int>());
  }
  return s;
}

}  // namespace

void write_snapshot(std::ostream& out, const ModelSnapshot& snapshot) {
  out << json{{"format", kSnapshotFormat},
              {"version", kSnapshotVersion},
              {"model", to_string(snapshot.kind)}}
             .dump()
      << '\n';
  for (const auto& [id, state] : snapshot.learners) {
    out << learner_to_json(id, state).dump() << '\n';
  }
  for (const auto& [key, belief] : snapshot.resources) {
    json r = {{"lecture_id", key.lecture_id}};
    r["fragment_index"] = key.fragment_index == ResourceKey::kWholeLecture
                              ? json(nullptr)
                              : json(key.fragment_index);
    r["kc_id"] = key.kc_id == ResourceKey::kNoKc ? json(nullptr) : json(key.kc_id);
    out << json{{"resource", std::move(r)},
                {"mean", belief.mean},
                {"variance", belief.variance}}
               .dump()
        << '\n';
  }
}

ModelSnapshot read_snapshot(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty state snapshot");
  ModelSnapshot snap;
  try {
    const json header = json::parse(line);
    if (header.value("format", std::string{}) != kSnapshotFormat) {
      throw DataError("not a model state snapshot");
    }
    const int version = header.at("version").get<int>();
    if (version != kSnapshotVersion) {
      throw DataError("unsupported snapshot version " + std::to_string(version));
    }
    snap.kind = parse_model_kind(header.at("model").get<std::string>());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.contains("learner_id")) {
        const auto id = j.at("learner_id").get<std::string>();
        if (!snap.learners.emplace(id, learner_from_json(j)).second) {
          throw DataError("duplicate learner " + id + " in snapshot");
        }
      } else if (j.contains("resource")) {
        const auto& r = j.at("resource");
        ResourceKey key;
        key.lecture_id = r.at("lecture_id").get<std::string>();
        if (!r.at("fragment_index").is_null()) {
          key.fragment_index = r.at("fragment_index").get<std::size_t>();
        }
        if (!r.at("kc_id").is_null()) key.kc_id = r.at("kc_id").get<KcId>();
        snap.resources[key] = {j.at("mean").get<double>(), j.at("variance").get<double>()};
      } else {
        throw DataError("snapshot line " + std::to_string(line_no) +
                        " is neither a learner nor a resource");
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed snapshot: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed snapshot: ") + e.what());
  }
  return snap;
}

}  // namespace truelearn
