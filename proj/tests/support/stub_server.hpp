#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "curricode/llmeval/chat.hpp"

// In-process chat-completions endpoint on 127.0.0.1 with a scripted handler.
namespace curricode::testing {

struct StubReply {
  int status = 200;
  std::string body;
};

inline std::string completion_body(const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

/// Code inside the last ```python fence of any user message.
inline std::string last_fenced_code(const nlohmann::json& request) {
  const std::string open = "```python\n";
  std::string text;
  for (const auto& m : request.at("messages"))
    if (m.at("role") == "user" && m.at("content").get<std::string>().find(open) != std::string::npos)
      text = m.at("content").get<std::string>();
  const auto b = text.rfind(open);
  if (b == std::string::npos) return {};
  const auto e = text.find("\n```", b + open.size());
  return text.substr(b + open.size(), e == std::string::npos ? std::string::npos : e - b - open.size());
}

class StubServer {
 public:
  using Handler = std::function<StubReply(const nlohmann::json& request, int call)>;

  explicit StubServer(Handler h) : handler_(std::move(h)) {
    svr_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int call = ++calls_;
      {
        std::lock_guard lock(mu_);
        requests_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      StubReply r;
      try {
        r = handler_(nlohmann::json::parse(req.body), call);
      } catch (const std::exception& e) {
        r = {500, e.what()};
      }
      res.status = r.status;
      res.set_content(r.body, "application/json");
    });
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }

  ~StubServer() {
    svr_.stop();
    if (thread_.joinable()) thread_.join();
  }

  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  [[nodiscard]] std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  [[nodiscard]] int calls() const { return calls_.load(); }
  [[nodiscard]] std::vector<std::string> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }
  [[nodiscard]] std::vector<std::string> auth_headers() const {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  Handler handler_;
  httplib::Server svr_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  mutable std::mutex mu_;
  std::vector<std::string> requests_;
  std::vector<std::string> auth_;
};

}  // namespace curricode::testing
