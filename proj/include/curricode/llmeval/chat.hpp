#pragma once

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "curricode/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace curricode::llm {

struct Message {
  std::string role;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

class ChatError : public Error {
 public:
  using Error::Error;
};

class AuthError : public ChatError {
 public:
  explicit AuthError(int status) : ChatError("endpoint rejected the credentials (HTTP " + std::to_string(status) + ")") {}
};

class RateLimited : public ChatError {
 public:
  explicit RateLimited(int attempts)
      : ChatError("still rate limited after " + std::to_string(attempts) + " attempts") {}
};

class MalformedResponse : public ChatError {
 public:
  using ChatError::ChatError;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

struct ChatConfig {
  std::string api_base;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::filesystem::path cache_dir;  // empty: no cache
  int max_attempts = 5;
  std::chrono::milliseconds backoff{500};  // doubled after each failed attempt
  std::chrono::seconds timeout{120};

  /// CURRICODE_API_BASE, CURRICODE_API_KEY, CURRICODE_CACHE_DIR
  static ChatConfig from_env() {
    ChatConfig c;
    if (const char* v = std::getenv("CURRICODE_API_BASE")) c.api_base = v;
    if (const char* v = std::getenv("CURRICODE_API_KEY")) c.api_key = v;
    if (const char* v = std::getenv("CURRICODE_CACHE_DIR")) c.cache_dir = v;
    return c;
  }
};

/// Request body for the chat-completions route; temperature is always 0.
inline nlohmann::ordered_json request_body(const std::string& model, const std::vector<Message>& messages) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
  j["temperature"] = 0.0;
  return j;
}

inline std::string cache_key(const std::string& model, const std::vector<Message>& messages) {
  return sha256_hex(request_body(model, messages).dump());
}

inline std::string parse_content(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedResponse(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw MalformedResponse("response has no choices");
  const auto& c = j["choices"][0];
  if (!c.is_object() || !c.contains("message") || !c["message"].is_object() || !c["message"].contains("content") ||
      !c["message"]["content"].is_string())
    throw MalformedResponse("response has no choices[0].message.content");
  return c["message"]["content"].get<std::string>();
}

/// OpenAI-compatible chat client with retries and an on-disk response cache.
class ChatClient {
 public:
  explicit ChatClient(ChatConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.cache_dir.empty()) std::filesystem::create_directories(cfg_.cache_dir);
  }

  [[nodiscard]] const ChatConfig& config() const { return cfg_; }
  [[nodiscard]] long network_calls() const { return calls_.load(); }
  [[nodiscard]] long cache_hits() const { return hits_.load(); }

  std::string complete(const std::string& model, const std::vector<Message>& messages) {
    const std::string key = cache_key(model, messages);
    if (auto cached = lookup(key)) {
      ++hits_;
      return *cached;
    }
    std::string content = post(model, messages);
    store(key, model, messages, content);
    return content;
  }

 private:
  struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // route prefix
  };

  [[nodiscard]] Endpoint endpoint() const {
    if (cfg_.api_base.empty()) throw ChatError("no endpoint configured (set CURRICODE_API_BASE)");
    std::string base = cfg_.api_base;
    while (!base.empty() && base.back() == '/') base.pop_back();
    const auto scheme = base.find("://");
    const auto slash = base.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash == std::string::npos) return {base, "/chat/completions"};
    return {base.substr(0, slash), base.substr(slash) + "/chat/completions"};
  }

  std::string post(const std::string& model, const std::vector<Message>& messages) {
    const Endpoint ep = endpoint();
    httplib::Client cli(ep.origin);
    cli.set_read_timeout(cfg_.timeout);
    cli.set_connection_timeout(std::chrono::seconds(10));
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    const std::string body = request_body(model, messages).dump();

    int last_status = 0;
    std::string last_error;
    auto wait = cfg_.backoff;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      ++calls_;
      auto res = cli.Post(ep.path, headers, body, "application/json");
      if (res) {
        last_status = res->status;
        if (res->status == 200) return parse_content(res->body);
        if (res->status == 401 || res->status == 403) throw AuthError(res->status);
        if (res->status != 429 && res->status < 500)
          throw ChatError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      } else {
        last_status = 0;
        last_error = httplib::to_string(res.error());
      }
      if (attempt < cfg_.max_attempts) {
        std::this_thread::sleep_for(wait);
        wait *= 2;
      }
    }
    if (last_status == 429) throw RateLimited(cfg_.max_attempts);
    if (last_status != 0) throw ChatError("endpoint kept failing with HTTP " + std::to_string(last_status));
    throw ChatError("transport error after " + std::to_string(cfg_.max_attempts) + " attempts: " + last_error);
  }

  std::optional<std::string> lookup(const std::string& key) {
    if (cfg_.cache_dir.empty()) return std::nullopt;
    std::lock_guard lock(mu_);
    std::ifstream in(cfg_.cache_dir / (key + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return nlohmann::json::parse(ss.str()).at("response").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
  }

  void store(const std::string& key, const std::string& model, const std::vector<Message>& messages,
             const std::string& content) {
    if (cfg_.cache_dir.empty()) return;
    std::lock_guard lock(mu_);
    const auto final_path = cfg_.cache_dir / (key + ".json");
    if (std::filesystem::exists(final_path)) return;  // first writer wins
    auto rec = request_body(model, messages);
    rec["key"] = key;
    rec["response"] = content;
    const auto tmp = cfg_.cache_dir / (key + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write cache entry " + tmp.string());
      out << rec.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, final_path);
  }

  ChatConfig cfg_;
  std::mutex mu_;
  std::atomic<long> calls_{0};
  std::atomic<long> hits_{0};
};

}  // namespace curricode::llm
