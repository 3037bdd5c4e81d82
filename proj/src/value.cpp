#include "ubdb/value.hpp"

#include <stdexcept>

namespace ubdb {

void serialize_value(const Value& v, std::string& out) {
  out.push_back(static_cast<char>(v.tag));
  switch (v.tag) {
    case Value::Tag::Atom:
      out.push_back(static_cast<char>(v.set_id));
      out.push_back(static_cast<char>(v.index));
      break;
    case Value::Tag::Bool:
      out.push_back(v.b ? 1 : 0);
      break;
    case Value::Tag::Set:
    case Value::Tag::Pair:
      if (v.items.size() > 250) throw std::length_error("value too large to serialize");
      out.push_back(static_cast<char>(v.items.size()));
      for (const auto& it : v.items) serialize_value(it, out);
      break;
  }
}

Value deserialize_value(const std::string& data, size_t& pos) {
  Value v;
  v.tag = static_cast<Value::Tag>(data[pos++]);
  switch (v.tag) {
    case Value::Tag::Atom:
      v.set_id = static_cast<unsigned char>(data[pos++]);
      v.index = static_cast<unsigned char>(data[pos++]);
      break;
    case Value::Tag::Bool:
      v.b = data[pos++] != 0;
      break;
    case Value::Tag::Set:
    case Value::Tag::Pair: {
      size_t n = static_cast<unsigned char>(data[pos++]);
      v.items.reserve(n);
      for (size_t i = 0; i < n; ++i) v.items.push_back(deserialize_value(data, pos));
      break;
    }
  }
  return v;
}

void serialize_state(const State& s, std::string& out) {
  for (const auto& v : s) serialize_value(v, out);
}

State deserialize_state(const std::string& data) {
  State s;
  size_t pos = 0;
  while (pos < data.size()) s.push_back(deserialize_value(data, pos));
  return s;
}

std::string value_to_string(const Value& v, const std::vector<std::string>& carriers) {
  switch (v.tag) {
    case Value::Tag::Atom: {
      std::string name = v.set_id >= 0 && v.set_id < static_cast<int>(carriers.size())
                             ? carriers[v.set_id]
                             : "?";
      return name + "#" + std::to_string(v.index + 1);
    }
    case Value::Tag::Bool:
      return v.b ? "true" : "false";
    case Value::Tag::Pair:
      return value_to_string(v.items[0], carriers) + "|->" + value_to_string(v.items[1], carriers);
    case Value::Tag::Set: {
      std::string out = "{";
      for (size_t i = 0; i < v.items.size(); ++i) {
        if (i) out += ", ";
        out += value_to_string(v.items[i], carriers);
      }
      return out + "}";
    }
  }
  return "?";
}

}  // namespace ubdb
