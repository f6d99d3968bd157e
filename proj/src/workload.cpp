#include "memshare/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace memshare {

std::uint32_t SizeDist::sample(std::uint64_t key_hash) const {
  switch (kind) {
    case Kind::Constant:
      return value;
    case Kind::Uniform: {
      std::uint64_t span = max >= min ? max - min + 1 : 1;
      return min + static_cast<std::uint32_t>(key_hash % span);
    }
    case Kind::TwoPoint: {
      double u = static_cast<double>(key_hash >> 11) * 0x1.0p-53;
      return u < p_a ? a : b;
    }
  }
  return value;
}

namespace {

double zeta(std::uint64_t n, double theta) {
  double sum = 0;
  for (std::uint64_t i = 1; i <= n; ++i) sum += 1.0 / std::pow(static_cast<double>(i), theta);
  return sum;
}

}  // namespace

ZipfianGenerator::ZipfianGenerator(std::uint64_t n, double theta)
    : n_(n), theta_(theta), zetan_(zeta(n, theta)), alpha_(1.0 / (1.0 - theta)) {
  if (n == 0) throw InvalidSpecError("zipfian keyspace must be > 0");
  if (theta <= 0.0 || theta >= 1.0)
    throw InvalidSpecError("zipfian theta must be in (0, 1)");
  eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n_), 1.0 - theta_)) /
         (1.0 - zeta(2, theta_) / zetan_);
}

std::uint64_t ZipfianGenerator::next(Rng& rng) {
  double u = rng.next_double();
  double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (uz < 1.0 + std::pow(0.5, theta_)) return 1;
  auto rank = static_cast<std::uint64_t>(
      static_cast<double>(n_) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(rank, n_ - 1);
}

WorkloadSpec parse_workload_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpecError(std::string("workload spec is not valid JSON: ") + e.what());
  }
  WorkloadSpec spec;
  try {
    spec.duration = j.at("duration_us").get<Timestamp>();
    for (const auto& ja : j.at("apps")) {
      AppWorkload app;
      app.id = ja.at("id").get<AppId>();
      app.keyspace = ja.at("keyspace").get<std::uint64_t>();
      app.get_fraction = ja.value("get_fraction", 0.9);
      app.key_prefix = ja.value("key_prefix", "a" + std::to_string(app.id) + "-");

      if (ja.contains("object_size")) {
        const auto& js = ja.at("object_size");
        std::string kind = js.at("kind").get<std::string>();
        if (kind == "constant") {
          app.size.kind = SizeDist::Kind::Constant;
          app.size.value = js.at("value").get<std::uint32_t>();
        } else if (kind == "uniform") {
          app.size.kind = SizeDist::Kind::Uniform;
          app.size.min = js.at("min").get<std::uint32_t>();
          app.size.max = js.at("max").get<std::uint32_t>();
        } else if (kind == "two_point") {
          app.size.kind = SizeDist::Kind::TwoPoint;
          app.size.a = js.at("a").get<std::uint32_t>();
          app.size.b = js.at("b").get<std::uint32_t>();
          app.size.p_a = js.at("p_a").get<double>();
        } else {
          throw InvalidSpecError("unknown object_size kind '" + kind + "'");
        }
      }
      if (ja.contains("popularity")) {
        const auto& jp = ja.at("popularity");
        std::string kind = jp.at("kind").get<std::string>();
        if (kind == "uniform") {
          app.popularity.kind = Popularity::Kind::Uniform;
        } else if (kind == "zipfian") {
          app.popularity.kind = Popularity::Kind::Zipfian;
          app.popularity.theta = jp.value("theta", 0.99);
        } else {
          throw InvalidSpecError("unknown popularity kind '" + kind + "'");
        }
      }
      if (ja.contains("rate")) {
        const auto& jr = ja.at("rate");
        std::string kind = jr.at("kind").get<std::string>();
        app.rate.base_per_sec = jr.at("base_per_sec").get<double>();
        if (kind == "steady") {
          app.rate.kind = RateProfile::Kind::Steady;
        } else if (kind == "burst") {
          app.rate.kind = RateProfile::Kind::Burst;
          app.rate.burst_start = jr.at("start_us").get<Timestamp>();
          app.rate.burst_duration = jr.at("duration_us").get<Timestamp>();
          app.rate.multiplier = jr.at("multiplier").get<double>();
        } else {
          throw InvalidSpecError("unknown rate kind '" + kind + "'");
        }
      }
      spec.apps.push_back(std::move(app));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpecError(std::string("workload spec missing field: ") + e.what());
  }
  if (spec.apps.empty()) throw InvalidSpecError("workload spec has no apps");
  for (const auto& app : spec.apps) {
    if (app.keyspace == 0) throw InvalidSpecError("keyspace must be > 0");
    if (app.get_fraction < 0 || app.get_fraction > 1)
      throw InvalidSpecError("get_fraction must be in [0, 1]");
    if (app.rate.base_per_sec <= 0) throw InvalidSpecError("base_per_sec must be > 0");
  }
  return spec;
}

WorkloadSpec load_workload_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open workload spec: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_workload_spec(ss.str());
}

std::vector<TraceRecord> generate(const WorkloadSpec& spec, std::uint64_t seed) {
  struct Event {
    TraceRecord rec;
    std::uint64_t seq;
  };
  std::vector<Event> events;

  for (const auto& app : spec.apps) {
    Rng rng(derive_seed(seed, app.id));
    std::optional<ZipfianGenerator> zipf;
    if (app.popularity.kind == Popularity::Kind::Zipfian)
      zipf.emplace(app.keyspace, app.popularity.theta);

    std::uint64_t seq = 0;
    double t_us = 0;
    while (t_us < static_cast<double>(spec.duration)) {
      auto ts = static_cast<Timestamp>(t_us);
      TraceRecord rec;
      rec.ts = ts;
      rec.app = app.id;
      std::uint64_t idx = app.popularity.kind == Popularity::Kind::Zipfian
                              ? zipf->next(rng)
                              : rng.bounded(app.keyspace);
      rec.key = app.key_prefix + std::to_string(idx);
      rec.size = app.size.sample(hash_key(rec.key));
      rec.op = rng.next_double() < app.get_fraction ? TraceOp::Get : TraceOp::Set;
      events.push_back({std::move(rec), seq++});

      double rate = app.rate.base_per_sec;
      if (app.rate.kind == RateProfile::Kind::Burst && ts >= app.rate.burst_start &&
          ts < app.rate.burst_start + app.rate.burst_duration) {
        rate *= app.rate.multiplier;
      }
      t_us += static_cast<double>(kMicrosPerSecond) / rate;
    }
  }

  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.rec.ts != b.rec.ts) return a.rec.ts < b.rec.ts;
    if (a.rec.app != b.rec.app) return a.rec.app < b.rec.app;
    return a.seq < b.seq;
  });

  std::vector<TraceRecord> out;
  out.reserve(events.size());
  for (auto& e : events) out.push_back(std::move(e.rec));
  return out;
}

}  // namespace memshare
