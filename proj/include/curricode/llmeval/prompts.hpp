#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "curricode/corpus.hpp"
#include "curricode/error.hpp"

namespace curricode::llm {

enum class Protocol { ZeroShot, FewShot, ChainOfThought, Critique };

inline const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::ZeroShot: return "zero-shot";
    case Protocol::FewShot: return "few-shot";
    case Protocol::ChainOfThought: return "chain-of-thought";
    case Protocol::Critique: return "critique";
  }
  return "?";
}

inline Protocol parse_protocol(std::string_view s) {
  for (auto p : {Protocol::ZeroShot, Protocol::FewShot, Protocol::ChainOfThought, Protocol::Critique})
    if (s == protocol_name(p)) return p;
  if (s == "cot") return Protocol::ChainOfThought;
  throw Error("unknown protocol \"" + std::string(s) + "\"");
}

class MissingSlot : public Error {
 public:
  explicit MissingSlot(const std::string& slot) : Error("prompt slot {" + slot + "} has no value") {}
};

enum class Role { System, User, Response };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Response: return "assistant";
  }
  return "?";
}

/// One turn of a protocol. Response turns are filled by the model; the
/// text of every other turn may hold {code}, {fewshot_code} and
/// {fewshot_docstring}.
struct Turn {
  Role role;
  std::string text;
};

struct PromptTemplate {
  Protocol protocol;
  std::vector<Turn> turns;
};

struct FewShot {
  std::string code;
  std::string docstring;
};

inline constexpr std::string_view kSystemPrompt =
    "You are a programming assistant skilled at understanding code and generating concise documentation.";

inline constexpr std::string_view kInstruction =
    "Please generate a one-line docstring for the following code that briefly describes its functionality. "
    "Only return the docstring without any additional text.\n"
    "Please generate the text in the following format, with triple quotes surrounding the content:\n"
    "\"\"\"Generated docstring.\"\"\"\n"
    "Code:\n"
    "```python\n"
    "{code}\n"
    "```";

inline constexpr std::string_view kFewShotExample =
    "Example:\n"
    "Code:\n"
    "```python\n"
    "{fewshot_code}\n"
    "```\n"
    "Docstring:\n"
    "\"\"\"{fewshot_docstring}\"\"\"";

inline constexpr std::string_view kCotQuestions =
    "Code:\n"
    "```python\n"
    "{code}\n"
    "```\n"
    "\n"
    "Question:\n"
    "1. What is the name of the function?\n"
    "2. What are the input parameters that are being accepted by the function?\n"
    "3. What is the expected output or return value of the function?\n"
    "4. Are there any special requirements or constraints for using the function?\n"
    "5. Does the function have any additional dependencies or external requirements?\n"
    "Please answer the above questions.";

inline PromptTemplate prompt_template(Protocol p) {
  const std::string sys(kSystemPrompt), ins(kInstruction);
  switch (p) {
    case Protocol::ZeroShot:
      return {p, {{Role::System, sys}, {Role::User, ins}, {Role::Response, {}}}};
    case Protocol::FewShot:
      // The example block is repeated once per shot.
      return {p,
              {{Role::System, sys},
               {Role::User, "Please refer to the following examples.\n{fewshot_examples}\n\n" + ins},
               {Role::Response, {}}}};
    case Protocol::ChainOfThought:
      return {p,
              {{Role::User, std::string(kCotQuestions)},
               {Role::Response, {}},
               {Role::System, sys},
               {Role::User, "Let's integrate the above information. " + ins},
               {Role::Response, {}}}};
    case Protocol::Critique:
      return {p,
              {{Role::System, sys},
               {Role::User, ins},
               {Role::Response, {}},
               {Role::User, "Review your previous answer and find problems with your answer."},
               {Role::Response, {}},
               {Role::User, "Based on the problems you found, improve your answer."},
               {Role::Response, {}}}};
  }
  throw Error("unknown protocol");
}

namespace detail {

inline std::string substitute(std::string text, std::string_view slot, std::string_view value) {
  const std::string key = "{" + std::string(slot) + "}";
  for (std::size_t p = text.find(key); p != std::string::npos; p = text.find(key, p + value.size()))
    text.replace(p, key.size(), value);
  return text;
}

/// Code goes between fences on its own lines.
inline std::string fence_body(std::string_view code) {
  while (!code.empty() && (code.back() == '\n' || code.back() == '\r')) code.remove_suffix(1);
  return std::string(code);
}

}  // namespace detail

/// Fills every slot. Response turns come back with empty text.
inline std::vector<Turn> render_prompt(const PromptTemplate& t, std::string_view code,
                                       const std::vector<FewShot>& fewshots = {}) {
  std::vector<Turn> out;
  for (const auto& turn : t.turns) {
    std::string text = turn.text;
    if (text.find("{fewshot_examples}") != std::string::npos) {
      if (fewshots.empty()) throw MissingSlot("fewshot_code");
      std::string block;
      for (const auto& fs : fewshots) {
        if (!block.empty()) block += "\n\n";
        block += detail::substitute(detail::substitute(std::string(kFewShotExample), "fewshot_code",
                                                       detail::fence_body(fs.code)),
                                    "fewshot_docstring", fs.docstring);
      }
      text = detail::substitute(text, "fewshot_examples", block);
    }
    text = detail::substitute(text, "code", detail::fence_body(code));
    out.push_back({turn.role, std::move(text)});
  }
  return out;
}

/// Plain-text dump used for the golden files: one "=== role ===" header per
/// turn, response turns shown as {response}.
inline std::string dump_turns(const std::vector<Turn>& turns) {
  std::string out;
  for (const auto& t : turns) {
    out += "=== ";
    out += role_name(t.role);
    out += " ===\n";
    out += t.role == Role::Response ? std::string("{response}") : t.text;
    out += "\n";
  }
  return out;
}

struct Extracted {
  std::string text;
  bool unfenced = false;
};

class EmptyResponse : public Error {
 public:
  EmptyResponse() : Error("model response holds no docstring") {}
};

/// First """...""" span, trimmed; otherwise the whole response, trimmed and
/// flagged as unfenced.
inline Extracted extract_docstring(std::string_view response) {
  const auto open = response.find("\"\"\"");
  if (open != std::string_view::npos) {
    const auto close = response.find("\"\"\"", open + 3);
    if (close != std::string_view::npos) {
      std::string s = corpus::trim(response.substr(open + 3, close - open - 3));
      if (s.empty()) throw EmptyResponse();
      return {std::move(s), false};
    }
  }
  std::string s = corpus::trim(response);
  if (s.empty()) throw EmptyResponse();
  return {std::move(s), true};
}

}  // namespace curricode::llm
