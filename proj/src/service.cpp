#include "kgsq/service.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "httplib.h"

namespace kgsq {

using nlohmann::json;

json results_json(const Vocabulary& vocab, const RankedList& list) {
  json results = json::array();
  for (const auto& e : list.entries) {
    json row;
    row["entity"] = vocab.entity_name(e.entity);
    if (vocab.has_type(e.entity)) row["type"] = vocab.type_of(e.entity);
    row["score"] = e.score;
    results.push_back(std::move(row));
  }
  return json{{"results", std::move(results)}};
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::vector<EntityMatch> search_entities(const Vocabulary& vocab, std::string_view q,
                                         const std::optional<std::string>& type, std::size_t limit) {
  std::vector<EntityMatch> out;
  if (q.empty() || limit == 0) return out;
  const std::string needle = lower(q);

  std::vector<std::pair<std::size_t, EntityId>> hits;
  for (std::size_t i = 0; i < vocab.entity_count(); ++i) {
    const auto id = static_cast<EntityId>(i);
    if (type && vocab.type_of(id) != *type) continue;
    const auto pos = lower(vocab.entity_name(id)).find(needle);
    if (pos != std::string::npos) hits.emplace_back(pos, id);
  }
  std::sort(hits.begin(), hits.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return vocab.entity_name(a.second) < vocab.entity_name(b.second);
  });
  for (std::size_t i = 0; i < hits.size() && i < limit; ++i) {
    const auto id = hits[i].second;
    out.push_back({vocab.entity_name(id), id, vocab.type_of(id)});
  }
  return out;
}

SessionStore::SessionStore(std::chrono::seconds ttl, std::size_t capacity, std::function<Clock::time_point()> now)
    : ttl_(ttl), capacity_(capacity), now_(std::move(now)), id_rng_(std::random_device{}()) {
  if (capacity_ == 0) throw Error("session capacity must be >= 1");
}

void SessionStore::purge_expired(Clock::time_point now) {
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->created_at >= ttl_) {
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::string SessionStore::fresh_id() {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << id_rng_() << std::setw(16) << id_rng_();
  return os.str();
}

std::string SessionStore::create(Session session) {
  std::lock_guard lock(mutex_);
  const auto now = now_();
  purge_expired(now);
  while (sessions_.size() >= capacity_) {
    auto oldest = std::min_element(sessions_.begin(), sessions_.end(), [](const auto& a, const auto& b) {
      return a.second->created_at < b.second->created_at;
    });
    sessions_.erase(oldest);
  }
  std::string id;
  do {
    id = fresh_id();
  } while (sessions_.count(id) != 0);
  auto entry = std::make_shared<Entry>();
  entry->created_at = now;
  entry->session = std::move(session);
  entry->session.session_id = id;
  sessions_.emplace(id, std::move(entry));
  return id;
}

bool SessionStore::with_session(const std::string& id, const std::function<void(Session&)>& fn) {
  std::shared_ptr<Entry> entry;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return false;
    if (now_() - it->second->created_at >= ttl_) {
      sessions_.erase(it);
      return false;
    }
    entry = it->second;
  }
  std::lock_guard lock(entry->mutex);
  fn(entry->session);
  return true;
}

std::size_t SessionStore::size() {
  std::lock_guard lock(mutex_);
  purge_expired(now_());
  return sessions_.size();
}

namespace {

struct HttpError {
  int status;
  json body;
};

HttpError bad_request(const std::string& message) { return {400, {{"error", "bad_request"}, {"message", message}}}; }

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw bad_request("body must be a JSON object");
  return body;
}

template <typename T>
T field(const json& body, const char* key, std::optional<T> fallback = std::nullopt) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) {
    if (fallback) return *fallback;
    throw bad_request(std::string("missing field '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw bad_request(std::string("field '") + key + "' has the wrong type");
  }
}

std::optional<std::string> optional_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw bad_request(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::size_t parse_k(const json& body) {
  auto it = body.find("k");
  if (it == body.end() || it->is_null()) return 10;
  if (!it->is_number_integer() || it->get<long long>() < 1) throw bad_request("k must be an integer >= 1");
  return it->get<std::size_t>();
}

Similarity parse_similarity(const json& body) {
  const auto name = optional_string(body, "similarity").value_or("dot");
  if (name == "dot") return Similarity::dot;
  if (name == "cosine") return Similarity::cosine;
  throw bad_request("similarity must be 'dot' or 'cosine'");
}

EntityId resolve(const Vocabulary& vocab, const std::string& name) {
  if (auto id = vocab.find_entity(name)) return *id;
  throw HttpError{404, {{"error", "unknown_entity"}, {"name", name}}};
}

std::vector<EntityId> resolve_all(const Vocabulary& vocab, const json& body, const char* key) {
  std::vector<EntityId> out;
  for (const auto& name : field<std::vector<std::string>>(body, key, std::vector<std::string>{})) {
    out.push_back(resolve(vocab, name));
  }
  return out;
}

json names_json(const Vocabulary& vocab, const std::vector<EntityId>& ids) {
  json out = json::array();
  for (auto id : ids) out.push_back(vocab.entity_name(id));
  return out;
}

json trail_json(const Vocabulary& vocab, const SessionStore::Session& s) {
  json steps = json::array();
  for (const auto& step : s.trail) {
    json j{{"positives", names_json(vocab, step.positives)},
           {"negatives", names_json(vocab, step.negatives)},
           {"k", step.k},
           {"results", results_json(vocab, step.results)["results"]}};
    if (step.type_filter) j["type_filter"] = *step.type_filter;
    steps.push_back(std::move(j));
  }
  return json{{"session_id", s.session_id}, {"anchor", vocab.entity_name(s.origin)}, {"steps", std::move(steps)}};
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

HttpError unknown_session(const std::string& id) {
  return {404, {{"error", "unknown_session"}, {"session_id", id}}};
}

}  // namespace

struct Service::Impl {
  EmbeddingModel<float> model;
  ServiceConfig config;
  SessionStore sessions;
  httplib::Server server;

  Impl(EmbeddingModel<float> m, ServiceConfig c)
      : model(std::move(m)), config(std::move(c)), sessions(config.ttl, config.capacity) {}

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static Handler guarded(Handler inner) {
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
      try {
        inner(req, res);
      } catch (const HttpError& e) {
        send(res, e.status, e.body);
      } catch (const Error& e) {
        send(res, 400, {{"error", "bad_request"}, {"message", e.what()}});
      } catch (const std::exception& e) {
        send(res, 500, {{"error", "internal"}, {"message", e.what()}});
      }
    };
  }

  QuerySpec query_spec(const json& body) const {
    QuerySpec spec;
    spec.anchor = resolve(model.vocabulary, field<std::string>(body, "entity"));
    spec.positives = resolve_all(model.vocabulary, body, "positives");
    spec.negatives = resolve_all(model.vocabulary, body, "negatives");
    spec.k = parse_k(body);
    spec.type_filter = optional_string(body, "type_filter");
    spec.exclude = field<bool>(body, "exclude_self", true);
    spec.similarity = parse_similarity(body);
    return spec;
  }

  void routes() {
    server.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) {
      send(res, 200, {{"status", "ok"}, {"entities", model.entity_count()}, {"dim", model.dim()}});
    }));

    server.Get("/entities", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::size_t limit = 20;
      if (req.has_param("limit")) {
        try {
          const long long v = std::stoll(req.get_param_value("limit"));
          if (v < 1) throw bad_request("limit must be >= 1");
          limit = static_cast<std::size_t>(v);
        } catch (const std::logic_error&) {
          throw bad_request("limit must be an integer");
        }
      }
      std::optional<std::string> type;
      if (req.has_param("type") && !req.get_param_value("type").empty()) type = req.get_param_value("type");
      json out = json::array();
      for (const auto& m : search_entities(model.vocabulary, req.get_param_value("q"), type, limit)) {
        json row{{"name", m.name}, {"id", m.id}};
        if (!m.type.empty()) row["type"] = m.type;
        out.push_back(std::move(row));
      }
      send(res, 200, {{"entities", std::move(out)}});
    }));

    server.Post("/query/similar", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      body.erase("positives");
      body.erase("negatives");
      send(res, 200, results_json(model.vocabulary, similar_entities(model, query_spec(body))));
    }));

    server.Post("/query/biased", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      body.erase("negatives");
      send(res, 200, results_json(model.vocabulary, similar_with_bias(model, query_spec(body))));
    }));

    server.Post("/query/analogy", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      send(res, 200, results_json(model.vocabulary, analogy_query(model, query_spec(body))));
    }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const EntityId anchor = resolve(model.vocabulary, field<std::string>(body, "entity"));
      const auto id = sessions.create(browse_start(model, anchor));
      send(res, 201, {{"session_id", id}});
    }));

    server.Post(R"(/sessions/([0-9a-f]+)/step)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto body = parse_body(req);
      const auto positives = resolve_all(model.vocabulary, body, "positives");
      const auto negatives = resolve_all(model.vocabulary, body, "negatives");
      const auto k = parse_k(body);
      const auto type_filter = optional_string(body, "type_filter");
      const auto similarity = parse_similarity(body);
      json out;
      const bool found = sessions.with_session(id, [&](SessionStore::Session& s) {
        const auto results = browse_step(model, s, positives, negatives, k, type_filter, similarity);
        out = results_json(model.vocabulary, results);
        out["session_id"] = id;
        out["step"] = s.trail.size();
      });
      if (!found) throw unknown_session(id);
      send(res, 200, out);
    }));

    server.Post(R"(/sessions/([0-9a-f]+)/back)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      json out;
      bool at_start = false;
      const bool found = sessions.with_session(id, [&](SessionStore::Session& s) {
        if (s.trail.empty()) {
          at_start = true;
          return;
        }
        browse_back(s);
        out = trail_json(model.vocabulary, s);
      });
      if (!found) throw unknown_session(id);
      if (at_start) throw HttpError{409, {{"error", "at_session_start"}, {"session_id", id}}};
      send(res, 200, out);
    }));

    server.Get(R"(/sessions/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      json out;
      const bool found =
          sessions.with_session(id, [&](SessionStore::Session& s) { out = trail_json(model.vocabulary, s); });
      if (!found) throw unknown_session(id);
      send(res, 200, out);
    }));

    if (!config.static_dir.empty() && !server.set_mount_point("/", config.static_dir)) {
      throw Error("cannot serve static directory '" + config.static_dir + "'");
    }

    if (config.log_requests) {
      server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        json line{{"method", req.method}, {"path", req.path}, {"status", res.status}};
        std::cerr << line.dump() << '\n';
      });
    }
  }
};

Service::Service(EmbeddingModel<float> model, ServiceConfig config)
    : impl_(std::make_unique<Impl>(std::move(model), std::move(config))) {
  if (impl_->model.entity_count() == 0) throw Error("service: model has no entities");
  impl_->routes();
}

Service::~Service() = default;

int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

void Service::wait_until_ready() { impl_->server.wait_until_ready(); }

const EmbeddingModel<float>& Service::model() const { return impl_->model; }

SessionStore& Service::sessions() { return impl_->sessions; }

}  // namespace kgsq
