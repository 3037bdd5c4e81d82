#ifndef UBDB_VALUE_HPP
#define UBDB_VALUE_HPP

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

namespace ubdb {

// A finite-model value: a carrier-set atom, a boolean, a finite set (sorted,
// duplicate-free) or an ordered pair. Pairs nest to encode tuples.
struct Value {
  enum class Tag : uint8_t { Atom, Bool, Set, Pair };
  Tag tag = Tag::Set;
  int32_t set_id = 0;  // Atom: carrier id
  int32_t index = 0;   // Atom: instance index
  bool b = false;      // Bool
  std::vector<Value> items;  // Set: sorted elements; Pair: exactly two

  static Value atom(int set_id, int index) {
    Value v;
    v.tag = Tag::Atom;
    v.set_id = set_id;
    v.index = index;
    return v;
  }
  static Value boolean(bool b) {
    Value v;
    v.tag = Tag::Bool;
    v.b = b;
    return v;
  }
  static Value pair(Value a, Value b) {
    Value v;
    v.tag = Tag::Pair;
    v.items = {std::move(a), std::move(b)};
    return v;
  }
  static Value set(std::vector<Value> items) {
    Value v;
    v.tag = Tag::Set;
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    v.items = std::move(items);
    return v;
  }
  static Value empty_set() { return Value{}; }

  bool is_set() const { return tag == Tag::Set; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.tag != b.tag) return false;
    switch (a.tag) {
      case Tag::Atom: return a.set_id == b.set_id && a.index == b.index;
      case Tag::Bool: return a.b == b.b;
      default: return a.items == b.items;
    }
  }
  friend bool operator<(const Value& a, const Value& b) {
    if (a.tag != b.tag) return a.tag < b.tag;
    switch (a.tag) {
      case Tag::Atom:
        if (a.set_id != b.set_id) return a.set_id < b.set_id;
        return a.index < b.index;
      case Tag::Bool: return a.b < b.b;
      default: return a.items < b.items;
    }
  }
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

  bool contains(const Value& x) const {
    assert(tag == Tag::Set);
    return std::binary_search(items.begin(), items.end(), x);
  }
};

// Per-carrier-set instance bounds.
struct Scope {
  std::vector<int> bounds;  // indexed by carrier id

  int bound(int carrier) const {
    return carrier >= 0 && carrier < static_cast<int>(bounds.size()) ? bounds[carrier] : 0;
  }
};

// A state assigns a value to every machine variable (by slot index). Joint
// refinement exploration appends ghost-variable slots after the machine's own.
using State = std::vector<Value>;

void serialize_value(const Value& v, std::string& out);
// Reads one value starting at `pos`, advancing it.
Value deserialize_value(const std::string& data, size_t& pos);

void serialize_state(const State& s, std::string& out);
State deserialize_state(const std::string& data);

std::string value_to_string(const Value& v, const std::vector<std::string>& carriers);

}  // namespace ubdb

#endif
