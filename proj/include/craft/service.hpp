#pragma once

// HTTP session service behind the browser companion: humans submit squeezes,
// spectators step a scripted or LLM planner, and both see renders and
// metrics after every action.

#include <atomic>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "craft/clay.hpp"
#include "craft/error.hpp"
#include "craft/goals.hpp"
#include "craft/harness.hpp"
#include "craft/metrics.hpp"
#include "craft/planner.hpp"
#include "craft/render.hpp"

namespace craft {

enum class SessionMode { human, llm_spectate, scripted };

inline std::string_view to_string(SessionMode m) {
  switch (m) {
    case SessionMode::human: return "human";
    case SessionMode::llm_spectate: return "llm-spectate";
    case SessionMode::scripted: return "scripted";
  }
  return "human";
}

inline SessionMode parse_session_mode(std::string_view s) {
  if (s == "human") return SessionMode::human;
  if (s == "llm-spectate" || s == "llm_spectate" || s == "llm") return SessionMode::llm_spectate;
  if (s == "scripted") return SessionMode::scripted;
  throw InvalidArgument("mode must be human, llm-spectate or scripted, got '" + std::string(s) + "'");
}

/// Error with the HTTP status it should be answered with.
class HttpError : public Error {
 public:
  HttpError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct HistoryEntry {
  SqueezeAction action;
  std::string rationale;
  std::string source;  // human or planner
};

class Session {
 public:
  Session(std::string id, SessionMode mode, int grid_size, GoalSpec goal, const ExperimentConfig& cfg,
          std::shared_ptr<Transport> transport)
      : id_(std::move(id)),
        mode_(mode),
        grid_size_(grid_size),
        grid_(workspace_grid(grid_size)),
        goal_(std::move(goal)),
        cfg_(cfg),
        initial_(initial_disc(grid_, cfg.disc_radius_mm, cfg.initial_density)),
        field_(initial_) {
    cfg_.grid = grid_size;
    spec_ = cfg_.render_spec();
    if (mode_ != SessionMode::human) {
      cfg_.planner = mode_ == SessionMode::scripted ? PlannerKind::scripted : PlannerKind::llm;
      cfg_.strategy = Strategy::iterative;
      agents_ = make_agents(cfg_, std::move(transport));
    }
  }

  const std::string& id() const { return id_; }
  std::mutex& mutex() const { return mutex_; }

  const ClayField& initial() const { return initial_; }
  const ClayField& field() const { return field_; }
  const std::vector<HistoryEntry>& history() const { return history_; }
  bool terminated() const { return terminated_; }

  std::string url(std::string_view leaf) const { return "/sessions/" + id_ + "/" + std::string(leaf); }

  nlohmann::json state_json() const {
    nlohmann::json hist = nlohmann::json::array();
    for (std::size_t i = 0; i < history_.size(); ++i) {
      auto a = action_json(history_[i].action);
      a["index"] = i + 1;
      a["rationale"] = history_[i].rationale;
      a["source"] = history_[i].source;
      hist.push_back(std::move(a));
    }
    nlohmann::json cells = nlohmann::json::array();
    const auto arr = binary_array(field_);
    for (int r = 0; r < arr.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < arr.cols(); ++c) row.push_back(arr(r, c));
      cells.push_back(std::move(row));
    }
    return {{"id", id_},
            {"mode", std::string(to_string(mode_))},
            {"grid_size", grid_size_},
            {"grid", grid_},
            {"squeeze_mode", std::string(to_string(cfg_.squeeze_mode))},
            {"goal",
             {{"letter", goal_.letter},
              {"text", goal_.text_description},
              {"has_image", !goal_.text_only()},
              {"image_url", goal_.text_only() ? nlohmann::json() : nlohmann::json(url("goal.png"))}}},
            {"history", std::move(hist)},
            {"steps", history_.size()},
            {"max_steps", cfg_.max_steps},
            {"terminated", terminated_},
            {"reason", reason_},
            {"error", error_},
            {"total_mass", field_.total_mass()},
            {"cells", std::move(cells)},
            {"field", field_to_json(field_)},
            {"render_url", url("render.png")}};
  }

  std::vector<std::uint8_t> render_png() const { return render_state(field_, spec_); }

  std::vector<std::uint8_t> goal_png() const {
    if (goal_.text_only()) throw HttpError(404, "goal of session " + id_ + " has no image");
    return render_goal(goal_, grid_, spec_);
  }

  MetricsReport metrics() const {
    try {
      return evaluate_metrics(field_, goal_);
    } catch (const Error& e) {
      throw HttpError(422, std::string("metrics unavailable: ") + e.what());
    }
  }

  /// Metrics, or null plus the reason they are unavailable.
  nlohmann::json metrics_json() const {
    try {
      return {{"metrics", metrics()}, {"metrics_error", ""}};
    } catch (const Error& e) {
      return {{"metrics", nullptr}, {"metrics_error", e.what()}};
    }
  }

  nlohmann::json submit(SqueezeAction act) {
    require_active();
    if (cfg_.squeeze_mode == SqueezeMode::fixed) act.strength = Strength::fixed;
    if (cfg_.squeeze_mode == SqueezeMode::varied && act.strength == Strength::fixed)
      throw HttpError(422, "this session uses min, medium or max strengths");
    if (static_cast<int>(history_.size()) >= cfg_.max_steps) {
      finish("max_steps");
      throw HttpError(409, "session " + id_ + " used all " + std::to_string(cfg_.max_steps) + " actions");
    }
    execute(act, "", "human");
    return step_reply(true);
  }

  nlohmann::json propose() {
    require_active();
    Planner& p = planner();
    try {
      auto r = p.plan({&field_, &goal_, actions()});
      nlohmann::json traj = nlohmann::json::array();
      for (const auto& a : r.trajectory) traj.push_back(action_json(a));
      return {{"action", action_json(r.trajectory.at(0))}, {"trajectory", std::move(traj)}, {"rationale", r.rationale}};
    } catch (const NoImprovement& e) {
      return {{"action", nullptr}, {"trajectory", nlohmann::json::array()}, {"rationale", e.what()},
              {"reason", "planner_stop"}};
    }
  }

  /// One iteration of the closed loop: budget check, terminator, planner,
  /// then the squeeze.
  nlohmann::json step() {
    require_active();
    Planner& p = planner();
    if (static_cast<int>(history_.size()) >= cfg_.max_steps) {
      finish("max_steps");
      return step_reply(false);
    }
    if (agents_.terminator) {
      const auto t = agents_.terminator->decide(field_, goal_);
      if (t.decision.stop) {
        finish("terminator_stop");
        last_note_ = t.decision.rationale;
        return step_reply(false);
      }
    }
    PlannerResponse r;
    try {
      r = p.plan({&field_, &goal_, actions()});
    } catch (const NoImprovement& e) {
      finish("planner_stop");
      last_note_ = e.what();
      return step_reply(false);
    }
    try {
      execute(r.trajectory.at(0), r.rationale, "planner");
    } catch (const Error& e) {
      finish("error");
      error_ = e.what();
      return step_reply(false);
    }
    return step_reply(true);
  }

  void finish(std::string reason) {
    if (terminated_) return;
    terminated_ = true;
    reason_ = std::move(reason);
  }

  /// Replays the history from the initial disc.
  ClayField replay() const {
    ClayField f = initial_;
    for (const auto& h : history_) f = apply_squeeze(f, h.action, cfg_.prompt.strengths).field;
    return f;
  }

 private:
  void require_active() const {
    if (terminated_) throw HttpError(409, "session " + id_ + " already terminated (" + reason_ + ")");
  }

  Planner& planner() {
    if (!agents_.planner) throw HttpError(400, "session " + id_ + " is in human mode and has no planner");
    return *agents_.planner;
  }

  Trajectory actions() const {
    Trajectory t;
    for (const auto& h : history_) t.push_back(h.action);
    return t;
  }

  void execute(const SqueezeAction& act, std::string rationale, std::string source) {
    auto o = apply_squeeze(field_, act, cfg_.prompt.strengths);
    field_ = std::move(o.field);
    history_.push_back({canonicalize(act), std::move(rationale), std::move(source)});
    last_note_.clear();
  }

  nlohmann::json step_reply(bool executed) const {
    auto j = metrics_json();
    j["state"] = state_json();
    j["executed"] = executed;
    j["note"] = last_note_;
    return j;
  }

  std::string id_;
  SessionMode mode_;
  int grid_size_;
  GridSpec grid_;
  GoalSpec goal_;
  ExperimentConfig cfg_;
  RenderSpec spec_;
  Agents agents_;
  ClayField initial_;
  ClayField field_;
  std::vector<HistoryEntry> history_;
  bool terminated_ = false;
  std::string reason_;
  std::string error_;
  std::string last_note_;
  mutable std::mutex mutex_;
};

struct ServiceConfig {
  ExperimentConfig defaults{};
  std::shared_ptr<Transport> transport;  // for llm-spectate sessions; HTTP when null
};

class SessionStore {
 public:
  explicit SessionStore(ServiceConfig cfg = {}) : cfg_(std::move(cfg)) {
    letters_ = cfg_.defaults.letters_file.empty() ? builtin_letters() : load_letter_library(cfg_.defaults.letters_file);
  }

  /// Body: {grid, goal, mode, squeeze_mode?, goal_image?}. `goal` is a
  /// letter, or {"letter": ...} / {"text": ...}.
  std::shared_ptr<Session> create(const nlohmann::json& body) {
    ExperimentConfig cfg = cfg_.defaults;
    const int grid = body.value("grid", cfg.grid);
    workspace_grid(grid);
    const auto mode = parse_session_mode(body.value("mode", std::string("human")));
    if (body.contains("squeeze_mode")) {
      cfg.squeeze_mode = parse_squeeze_mode(body["squeeze_mode"].get<std::string>());
      cfg.prompt.squeeze_mode = cfg.squeeze_mode;
    }
    const bool with_image = body.value("goal_image", cfg.goal_image);
    cfg.goal_image = cfg.prompt.goal_image = with_image;
    if (!with_image) cfg.prompt.goal_text = true;
    if (!body.contains("goal")) throw InvalidArgument("session needs a goal");
    const auto& g = body["goal"];
    GoalSpec goal;
    if (g.is_string()) {
      goal = make_letter_goal(g.get<std::string>(), workspace_grid(grid), with_image, letters_);
    } else if (g.is_object() && g.contains("letter")) {
      goal = make_letter_goal(g["letter"].get<std::string>(), workspace_grid(grid), with_image, letters_);
    } else if (g.is_object() && g.contains("text")) {
      goal = make_text_goal(g["text"].get<std::string>());
      if (mode == SessionMode::scripted) throw InvalidArgument("scripted sessions need a letter goal");
      cfg.goal_image = cfg.prompt.goal_image = false;
      cfg.prompt.goal_text = true;
    } else {
      throw InvalidArgument("goal must be a letter or an object with 'letter' or 'text'");
    }
    std::lock_guard lock(mutex_);
    std::ostringstream id;
    id << std::hex << std::setw(8) << std::setfill('0') << ++counter_;
    auto s = std::make_shared<Session>(id.str(), mode, grid, std::move(goal), cfg, cfg_.transport);
    sessions_[s->id()] = s;
    return s;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw HttpError(404, "unknown session '" + id + "'");
    return it->second;
  }

  void erase(const std::string& id) {
    std::lock_guard lock(mutex_);
    if (sessions_.erase(id) == 0) throw HttpError(404, "unknown session '" + id + "'");
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

 private:
  ServiceConfig cfg_;
  LetterLibrary letters_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  unsigned long counter_ = 0;
};

namespace detail {

inline int status_for(const std::exception& e) {
  if (const auto* h = dynamic_cast<const HttpError*>(&e)) return h->status();
  if (dynamic_cast<const InvalidAction*>(&e) || dynamic_cast<const OverflowError*>(&e) ||
      dynamic_cast<const ParseError*>(&e) || dynamic_cast<const InvalidArgument*>(&e))
    return 422;
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const HttpStatusError*>(&e)) return 502;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return 400;
  return 500;
}

inline void reply_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw HttpError(400, std::string("request body is not JSON: ") + e.what());
  }
}

inline SqueezeAction action_from_body(const nlohmann::json& body, const GridSpec& grid) {
  if (!body.contains("cell_a") || !body.contains("cell_b")) throw HttpError(400, "action needs cell_a and cell_b");
  SqueezeAction act;
  act.a = parse_cell(body["cell_a"].get<std::string>(), grid);
  act.b = parse_cell(body["cell_b"].get<std::string>(), grid);
  act.strength = body.contains("strength") ? parse_strength(body["strength"].get<std::string>()) : Strength::medium;
  return act;
}

}  // namespace detail

class SessionServer {
 public:
  explicit SessionServer(ServiceConfig cfg = {}) : store_(std::move(cfg)) { routes(); }
  ~SessionServer() { stop(); }

  SessionStore& store() { return store_; }

  /// Binds and returns the port; 0 picks a free one.
  int bind(const std::string& host, int port) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port_;
  }

  /// Blocks until stop().
  void listen() {
    if (!server_.listen_after_bind()) throw Error("server loop failed on port " + std::to_string(port_));
  }

  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  template <typename F>
  auto guarded(F f) {
    return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const std::exception& e) {
        const int status = detail::status_for(e);
        detail::reply_json(res, {{"error", e.what()}, {"status", status}}, status);
      }
    };
  }

  template <typename F>
  auto with_session(F f) {
    return guarded([this, f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
      auto s = store_.get(req.matches[1].str());
      std::lock_guard lock(s->mutex());
      f(*s, req, res);
    });
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Headers", "Content-Type"},
                                 {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
    server_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server_.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = store_.create(detail::parse_body(req));
      std::lock_guard lock(s->mutex());
      auto j = s->state_json();
      detail::reply_json(res, j, 201);
    }));
    server_.Get(R"(/sessions/([^/]+))", with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
      detail::reply_json(res, s.state_json());
    }));
    server_.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      store_.erase(req.matches[1].str());
      res.status = 204;
    }));
    server_.Get(R"(/sessions/([^/]+)/render\.png)",
                with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                  const auto png = s.render_png();
                  res.set_content(std::string(png.begin(), png.end()), "image/png");
                }));
    server_.Get(R"(/sessions/([^/]+)/goal\.png)",
                with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                  const auto png = s.goal_png();
                  res.set_content(std::string(png.begin(), png.end()), "image/png");
                }));
    server_.Get(R"(/sessions/([^/]+)/metrics)",
                with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                  detail::reply_json(res, s.metrics());
                }));
    server_.Post(R"(/sessions/([^/]+)/actions)",
                 with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
                   const auto body = detail::parse_body(req);
                   detail::reply_json(res, s.submit(detail::action_from_body(body, s.field().grid())));
                 }));
    server_.Post(R"(/sessions/([^/]+)/plan)",
                 with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                   detail::reply_json(res, s.propose());
                 }));
    server_.Post(R"(/sessions/([^/]+)/step)",
                 with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                   detail::reply_json(res, s.step());
                 }));
    server_.Post(R"(/sessions/([^/]+)/finish)",
                 with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
                   s.finish("human_stop");
                   detail::reply_json(res, s.state_json());
                 }));
  }

  SessionStore store_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace craft
