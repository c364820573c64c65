#pragma once

#include <iostream>
#include <mutex>
#include <string>

namespace scenerag::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

struct Settings {
  Level level = Level::info;
  bool json = false;
};

inline Settings& settings() {
  static Settings s;
  return s;
}

inline Level parse_level(const std::string& name) {
  if (name == "debug") return Level::debug;
  if (name == "info") return Level::info;
  if (name == "warn" || name == "warning") return Level::warn;
  if (name == "error") return Level::error;
  if (name == "off" || name == "none") return Level::off;
  return Level::info;
}

inline const char* level_name(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warn";
    case Level::error: return "error";
    case Level::off: return "off";
  }
  return "info";
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline void write(Level l, const std::string& msg) {
  if (l < settings().level) return;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (settings().json) {
    std::cerr << "{\"level\":\"" << level_name(l) << "\",\"msg\":\""
              << json_escape(msg) << "\"}\n";
  } else {
    std::cerr << "[" << level_name(l) << "] " << msg << "\n";
  }
}

inline void debug(const std::string& msg) { write(Level::debug, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void warn(const std::string& msg) { write(Level::warn, msg); }
inline void error(const std::string& msg) { write(Level::error, msg); }

}  // namespace scenerag::log
