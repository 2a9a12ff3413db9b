// Copyright 2026 The MiniRay Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "common/value.h"

#include <bit>
#include <cstring>

namespace miniray {

namespace {

enum Tag : uint8_t {
  kUnit = 0,
  kInt = 1,
  kFloat = 2,
  kBlob = 3,
  kStr = 4,
  kList = 5,
  kMap = 6,
  kRef = 7,
  kActor = 8,
  kError = 9,
};

void PutString(Bytes &out, std::string_view s) {
  PutU32Be(out, static_cast<uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void PutId(Bytes &out, const UniqueId &id) {
  out.insert(out.end(), id.bytes().begin(), id.bytes().end());
}

struct Cursor {
  const uint8_t *p;
  size_t left;

  bool Take(size_t n, const uint8_t **out) {
    if (left < n) return false;
    *out = p;
    p += n;
    left -= n;
    return true;
  }
};

bool ReadString(Cursor &c, std::string &out) {
  const uint8_t *p;
  if (!c.Take(4, &p)) return false;
  uint32_t n = GetU32Be(p);
  if (!c.Take(n, &p)) return false;
  out.assign(reinterpret_cast<const char *>(p), n);
  return true;
}

bool ReadId(Cursor &c, UniqueId &out) {
  const uint8_t *p;
  if (!c.Take(UniqueId::kSize, &p)) return false;
  std::array<uint8_t, UniqueId::kSize> arr;
  std::memcpy(arr.data(), p, arr.size());
  out = UniqueId(arr);
  return true;
}

bool DecodeInto(Cursor &c, Value &out);

bool DecodeList(Cursor &c, Value::List &out) {
  const uint8_t *p;
  if (!c.Take(4, &p)) return false;
  uint32_t n = GetU32Be(p);
  out.reserve(std::min<uint32_t>(n, 4096));
  for (uint32_t i = 0; i < n; i++) {
    Value v;
    if (!DecodeInto(c, v)) return false;
    out.push_back(std::move(v));
  }
  return true;
}

bool DecodeInto(Cursor &c, Value &out) {
  const uint8_t *p;
  if (!c.Take(1, &p)) return false;
  switch (*p) {
    case kUnit:
      out = Value();
      return true;
    case kInt: {
      if (!c.Take(8, &p)) return false;
      out = Value::Int(static_cast<int64_t>(GetU64Be(p)));
      return true;
    }
    case kFloat: {
      if (!c.Take(8, &p)) return false;
      out = Value::Float(std::bit_cast<double>(GetU64Be(p)));
      return true;
    }
    case kBlob: {
      if (!c.Take(4, &p)) return false;
      uint32_t n = GetU32Be(p);
      if (!c.Take(n, &p)) return false;
      out = Value::Blob(Bytes(p, p + n));
      return true;
    }
    case kStr: {
      std::string s;
      if (!ReadString(c, s)) return false;
      out = Value::Str(std::move(s));
      return true;
    }
    case kList: {
      Value::List list;
      if (!DecodeList(c, list)) return false;
      out = Value::FromList(std::move(list));
      return true;
    }
    case kMap: {
      if (!c.Take(4, &p)) return false;
      uint32_t n = GetU32Be(p);
      Value::Map map;
      for (uint32_t i = 0; i < n; i++) {
        std::string key;
        if (!ReadString(c, key)) return false;
        Value v;
        if (!DecodeInto(c, v)) return false;
        map.emplace(std::move(key), std::move(v));
      }
      out = Value::FromMap(std::move(map));
      return true;
    }
    case kRef: {
      ObjectRef ref;
      if (!ReadId(c, ref.object_id) || !ReadId(c, ref.producing_task)) return false;
      if (!c.Take(8, &p)) return false;
      ref.output_index = GetU64Be(p);
      out = Value::Ref(ref);
      return true;
    }
    case kActor: {
      ActorHandleData h;
      if (!ReadId(c, h.actor_id) || !ReadId(c, h.creation_task)) return false;
      out = Value::Actor(h);
      return true;
    }
    case kError: {
      std::string code, message;
      if (!ReadString(c, code) || !ReadString(c, message)) return false;
      out = Value::MakeError(ErrorCodeFromName(code), std::move(message));
      return true;
    }
    default:
      return false;
  }
}

void EncodeInto(const Value &v, Bytes &out) {
  if (v.IsUnit()) {
    out.push_back(kUnit);
  } else if (v.IsInt()) {
    out.push_back(kInt);
    PutU64Be(out, static_cast<uint64_t>(v.AsInt()));
  } else if (v.IsFloat()) {
    out.push_back(kFloat);
    PutU64Be(out, std::bit_cast<uint64_t>(v.AsFloat()));
  } else if (v.IsBlob()) {
    out.push_back(kBlob);
    PutU32Be(out, static_cast<uint32_t>(v.AsBlob().size()));
    out.insert(out.end(), v.AsBlob().begin(), v.AsBlob().end());
  } else if (v.IsStr()) {
    out.push_back(kStr);
    PutString(out, v.AsStr());
  } else if (v.IsList()) {
    out.push_back(kList);
    PutU32Be(out, static_cast<uint32_t>(v.AsList().size()));
    for (const Value &e : v.AsList()) EncodeInto(e, out);
  } else if (v.IsMap()) {
    // std::map iterates keys in sorted order, which is the canonical order.
    out.push_back(kMap);
    PutU32Be(out, static_cast<uint32_t>(v.AsMap().size()));
    for (const auto &[key, e] : v.AsMap()) {
      PutString(out, key);
      EncodeInto(e, out);
    }
  } else if (v.IsRef()) {
    out.push_back(kRef);
    PutId(out, v.AsRef().object_id);
    PutId(out, v.AsRef().producing_task);
    PutU64Be(out, v.AsRef().output_index);
  } else if (v.IsActor()) {
    out.push_back(kActor);
    PutId(out, v.AsActor().actor_id);
    PutId(out, v.AsActor().creation_task);
  } else if (v.IsError()) {
    out.push_back(kError);
    PutString(out, ErrorCodeName(v.AsError().code));
    PutString(out, v.AsError().message);
  }
}

}  // namespace

Bytes Value::Encode() const {
  Bytes out;
  EncodeInto(*this, out);
  return out;
}

Result<Value> Value::Decode(std::span<const uint8_t> data) {
  Cursor c{data.data(), data.size()};
  Value out;
  if (!DecodeInto(c, out) || c.left != 0) {
    return Status::Error(ErrorCode::kInvalidArgument, "malformed value encoding");
  }
  return out;
}

void Value::CollectRefs(std::vector<ObjectRef> &out) const {
  if (IsRef()) {
    out.push_back(AsRef());
  } else if (IsList()) {
    for (const Value &e : AsList()) e.CollectRefs(out);
  } else if (IsMap()) {
    for (const auto &[_, e] : AsMap()) e.CollectRefs(out);
  }
}

std::string Value::ToString() const {
  if (IsUnit()) return "unit";
  if (IsInt()) return std::to_string(AsInt());
  if (IsFloat()) return std::to_string(AsFloat());
  if (IsBlob()) return "blob[" + std::to_string(AsBlob().size()) + "]";
  if (IsStr()) return "\"" + AsStr() + "\"";
  if (IsList()) {
    std::string s = "[";
    for (const Value &e : AsList()) {
      if (s.size() > 1) s += ",";
      s += e.ToString();
    }
    return s + "]";
  }
  if (IsMap()) {
    std::string s = "{";
    for (const auto &[k, e] : AsMap()) {
      if (s.size() > 1) s += ",";
      s += k + ":" + e.ToString();
    }
    return s + "}";
  }
  if (IsRef()) return "ref(" + AsRef().object_id.Hex().substr(0, 8) + ")";
  if (IsActor()) return "actor(" + AsActor().actor_id.Hex().substr(0, 8) + ")";
  if (IsError())
    return std::string("error(") + ErrorCodeName(AsError().code) + ": " +
           AsError().message + ")";
  return "?";
}

}  // namespace miniray
