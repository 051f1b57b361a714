#ifndef RVCLT_JSONOUT_HPP
#define RVCLT_JSONOUT_HPP

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rvclt {

// Minimal ordered JSON emitter. Numbers are serialized with 17 significant
// digits so outputs are byte-stable and round-trip exactly.
class Json {
 public:
  Json() : value_(nullptr) {}

  static Json num(double v) {
    Json j;
    j.value_ = v;
    return j;
  }
  static Json integer(std::int64_t v) {
    Json j;
    j.value_ = v;
    return j;
  }
  static Json uinteger(std::uint64_t v) {
    Json j;
    j.value_ = v;
    return j;
  }
  static Json str(std::string v) {
    Json j;
    j.value_ = std::move(v);
    return j;
  }
  static Json boolean(bool v) {
    Json j;
    j.value_ = v;
    return j;
  }
  static Json arr() {
    Json j;
    j.value_ = Array{};
    return j;
  }
  static Json obj() {
    Json j;
    j.value_ = Object{};
    return j;
  }

  Json& push(Json v) {
    std::get<Array>(value_).push_back(std::move(v));
    return *this;
  }
  Json& add(std::string key, Json v) {
    std::get<Object>(value_).emplace_back(std::move(key), std::move(v));
    return *this;
  }

  std::string dump(int indent = 2) const {
    std::string out;
    write(out, indent, 0);
    out += '\n';
    return out;
  }

 private:
  using Array = std::vector<Json>;
  using Object = std::vector<std::pair<std::string, Json>>;
  std::variant<std::nullptr_t, bool, double, std::int64_t, std::uint64_t, std::string, Array,
               Object>
      value_;

  static void escape(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
      }
    }
    out += '"';
  }

  void write(std::string& out, int indent, int depth) const {
    const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
    if (std::holds_alternative<std::nullptr_t>(value_)) {
      out += "null";
    } else if (const auto* b = std::get_if<bool>(&value_)) {
      out += *b ? "true" : "false";
    } else if (const auto* d = std::get_if<double>(&value_)) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", *d);
      out += buf;
    } else if (const auto* i = std::get_if<std::int64_t>(&value_)) {
      out += std::to_string(*i);
    } else if (const auto* u = std::get_if<std::uint64_t>(&value_)) {
      out += std::to_string(*u);
    } else if (const auto* s = std::get_if<std::string>(&value_)) {
      escape(out, *s);
    } else if (const auto* a = std::get_if<Array>(&value_)) {
      if (a->empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < a->size(); ++i) {
        out += pad;
        (*a)[i].write(out, indent, depth + 1);
        out += i + 1 < a->size() ? ",\n" : "\n";
      }
      out += close_pad + "]";
    } else if (const auto* o = std::get_if<Object>(&value_)) {
      if (o->empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      for (std::size_t i = 0; i < o->size(); ++i) {
        out += pad;
        escape(out, (*o)[i].first);
        out += ": ";
        (*o)[i].second.write(out, indent, depth + 1);
        out += i + 1 < o->size() ? ",\n" : "\n";
      }
      out += close_pad + "}";
    }
  }
};

}  // namespace rvclt

#endif  // RVCLT_JSONOUT_HPP
