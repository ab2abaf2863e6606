#include "uncal/typing.hpp"

#include <algorithm>

namespace uncal {

namespace {

const Ctx kAmp = {"&"};

Tc node(Kind k, std::string name, std::vector<Tc> kids, Ctx src, Ctx tgt, bool lv = false) {
  return std::make_shared<TTerm>(TTerm{k, std::move(name), lv, std::move(kids),
                                       std::move(src), std::move(tgt)});
}

std::string join(const Ctx& c) {
  std::string s;
  for (size_t i = 0; i < c.size(); ++i) {
    if (i) s += ",";
    s += c[i];
  }
  return s;
}

}  // namespace

bool ctx_contains(const Ctx& c, const std::string& m) {
  return std::find(c.begin(), c.end(), m) != c.end();
}

void check_ctx(const Ctx& c) {
  for (size_t i = 0; i < c.size(); ++i)
    for (size_t j = i + 1; j < c.size(); ++j)
      if (c[i] == c[j]) raise(Err::DuplicateMarker, c[i] + " repeats in context " + join(c));
}

Ctx ctx_concat(const Ctx& a, const Ctx& b) {
  Ctx out = a;
  out.insert(out.end(), b.begin(), b.end());
  check_ctx(out);
  return out;
}

std::vector<Ctx> pair_rename(const std::vector<Ctx>& tgts) {
  std::map<std::string, int> count;
  for (auto& t : tgts)
    for (auto& m : t) count[m]++;
  std::vector<Ctx> out;
  Ctx all;
  for (size_t i = 0; i < tgts.size(); ++i) {
    Ctx renamed;
    for (auto& m : tgts[i])
      renamed.push_back(count[m] > 1 ? m + "$" + std::to_string(i + 1) : m);
    all.insert(all.end(), renamed.begin(), renamed.end());
    out.push_back(std::move(renamed));
  }
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j)
      if (all[i] == all[j])
        raise(Err::ArityError, "pair target renaming still clashes on " + all[i]);
  return out;
}

Ctx target_of(const Rc& t, const CallSigs& sigs) {
  switch (t->kind) {
    case Kind::Mark:
    case Kind::Nil:
    case Kind::Man:
    case Kind::Edge: return kAmp;
    case Kind::Emp: return {};
    case Kind::Compose: return target_of(t->kids[0], sigs);
    case Kind::Def: return {t->name};
    case Kind::Cycle: return target_of(t->kids[0], sigs);
    case Kind::Call: {
      auto it = sigs.find(t->name);
      if (it == sigs.end()) raise(Err::UnknownFunction, t->name);
      return it->second;
    }
    case Kind::Pair: {
      std::vector<Ctx> tgts;
      for (auto& k : t->kids) tgts.push_back(target_of(k, sigs));
      Ctx out;
      for (auto& r : pair_rename(tgts)) out.insert(out.end(), r.begin(), r.end());
      return out;
    }
  }
  raise(Err::Internal, "target_of: unhandled kind");
}

namespace {

struct Inferrer {
  const CallSigs& sigs;

  Tc go(const Rc& t, const Ctx& y) {
    switch (t->kind) {
      case Kind::Mark:
        if (!ctx_contains(y, t->name))
          raise(Err::UnboundMarker, t->name + " not in source context <" + join(y) + ">");
        return node(Kind::Mark, t->name, {}, y, kAmp);
      case Kind::Nil: return node(Kind::Nil, "", {}, y, kAmp);
      case Kind::Emp: return node(Kind::Emp, "", {}, y, {});
      case Kind::Man:
        if (y.size() != 2)
          raise(Err::ContextMismatch,
                "! needs exactly two source markers, got <" + join(y) + ">");
        return node(Kind::Man, "", {}, y, kAmp);
      case Kind::Edge: {
        Tc child = go(t->kids[0], y);
        if (child->tgt != kAmp)
          raise(Err::ContextMismatch, "label child must have type <&>, got <" +
                                          join(child->tgt) + ">");
        return node(Kind::Edge, t->name, {child}, y, kAmp, t->label_var);
      }
      case Kind::Compose: {
        Tc rhs = go(t->kids[1], y);
        Tc lhs = go(t->kids[0], rhs->tgt);
        return node(Kind::Compose, "", {lhs, rhs}, y, lhs->tgt);
      }
      case Kind::Pair: {
        std::vector<Tc> kids;
        std::vector<Ctx> tgts;
        for (auto& k : t->kids) {
          kids.push_back(go(k, y));
          tgts.push_back(kids.back()->tgt);
        }
        std::vector<Ctx> renamed = pair_rename(tgts);
        Ctx tgt;
        for (size_t i = 0; i < kids.size(); ++i) {
          kids[i] = rename_target(kids[i], renamed[i]);
          tgt.insert(tgt.end(), renamed[i].begin(), renamed[i].end());
        }
        return node(Kind::Pair, "", std::move(kids), y, std::move(tgt));
      }
      case Kind::Cycle: {
        Ctx b = target_of(t->kids[0], sigs);
        for (auto& m : b)
          if (ctx_contains(y, m))
            raise(Err::DuplicateMarker,
                  "cycle binds " + m + " already present in <" + join(y) + ">");
        Tc body = go(t->kids[0], ctx_concat(y, b));
        if (body->tgt != b) raise(Err::Internal, "cycle target drifted from bottom-up pass");
        if (b.empty()) return body;  // cycle over an empty block is the body itself
        return node(Kind::Cycle, "", {body}, y, b);
      }
      case Kind::Def: {
        Tc child = go(t->kids[0], y);
        if (child->tgt.size() != 1)
          raise(Err::ContextMismatch, "definition body must have a singleton target, got <" +
                                          join(child->tgt) + ">");
        return node(Kind::Def, t->name, {child}, y, {t->name});
      }
      case Kind::Call: {
        auto it = sigs.find(t->name);
        if (it == sigs.end()) raise(Err::UnknownFunction, t->name);
        Tc arg = go(t->kids[0], y);
        if (arg->tgt != kAmp)
          raise(Err::ContextMismatch, "argument of " + t->name + " must have type <&>");
        return node(Kind::Call, t->name, {arg}, y, it->second);
      }
    }
    raise(Err::Internal, "infer: unhandled kind");
  }
};

}  // namespace

Tc infer(const Rc& t, const Ctx& src, const CallSigs& sigs) {
  check_ctx(src);
  return Inferrer{sigs}.go(t, src);
}

Rc to_raw(const Tc& t) {
  switch (t->kind) {
    case Kind::Mark: return mk_mark(t->name);
    case Kind::Nil: return mk_nil();
    case Kind::Emp: return mk_emp();
    case Kind::Man: return mk_man();
    case Kind::Edge: return mk_edge(t->name, to_raw(t->kids[0]), t->label_var);
    case Kind::Compose: return mk_compose(to_raw(t->kids[0]), to_raw(t->kids[1]));
    case Kind::Cycle: return mk_cycle(to_raw(t->kids[0]));
    case Kind::Def: return mk_def(t->name, to_raw(t->kids[0]));
    case Kind::Call: return mk_call(t->name, to_raw(t->kids[0]));
    case Kind::Pair: {
      // keep the component structure exactly (no re-flattening)
      std::vector<Rc> kids;
      for (auto& k : t->kids) kids.push_back(to_raw(k));
      return std::make_shared<Term>(Term{Kind::Pair, "", false, std::move(kids)});
    }
  }
  raise(Err::Internal, "to_raw: unhandled kind");
}

Tc rename_target(const Tc& t, const Ctx& new_tgt) {
  check_ctx(new_tgt);
  if (t->tgt.size() != new_tgt.size())
    raise(Err::LengthMismatch, "cannot rename <" + join(t->tgt) + "> to <" + join(new_tgt) + ">");
  if (t->tgt == new_tgt) return t;
  if (t->kind == Kind::Pair) {
    std::vector<Tc> kids;
    size_t off = 0;
    for (auto& k : t->kids) {
      Ctx part(new_tgt.begin() + off, new_tgt.begin() + off + k->tgt.size());
      off += k->tgt.size();
      kids.push_back(rename_target(k, part));
    }
    return node(Kind::Pair, "", std::move(kids), t->src, new_tgt);
  }
  if (new_tgt.size() == 1) {
    Tc child = t->kind == Kind::Def ? t->kids[0] : t;
    if (new_tgt[0] == "&" && child->tgt == kAmp) return child;
    return node(Kind::Def, new_tgt[0], {child}, t->src, new_tgt);
  }
  // multi-rooted non-pair: compose with a marker-renaming tuple
  std::vector<Tc> renames;
  for (size_t i = 0; i < new_tgt.size(); ++i) {
    Tc m = t_mark(t->tgt, t->tgt[i]);
    renames.push_back(new_tgt[i] == "&" ? m : node(Kind::Def, new_tgt[i], {m}, t->tgt, {new_tgt[i]}));
  }
  Tc tuple = node(Kind::Pair, "", std::move(renames), t->tgt, new_tgt);
  return node(Kind::Compose, "", {tuple, t}, t->src, new_tgt);
}

namespace {

void collect_names(const Tc& t, std::set<std::string>& out) {
  for (auto& m : t->src) out.insert(m);
  for (auto& m : t->tgt) out.insert(m);
  if (t->kind == Kind::Mark || t->kind == Kind::Def) out.insert(t->name);
  for (auto& k : t->kids) collect_names(k, out);
}

// Total marker rename. Typed contexts are pairwise distinct, so a bound name
// can never be shadowed; renaming every occurrence is sound.
Tc rename_markers(const Tc& t, const std::map<std::string, std::string>& m) {
  auto ren = [&](const std::string& s) {
    auto it = m.find(s);
    return it == m.end() ? s : it->second;
  };
  Ctx src, tgt;
  for (auto& x : t->src) src.push_back(ren(x));
  for (auto& x : t->tgt) tgt.push_back(ren(x));
  std::vector<Tc> kids;
  for (auto& k : t->kids) kids.push_back(rename_markers(k, m));
  std::string name = t->name;
  if (t->kind == Kind::Mark || t->kind == Kind::Def) name = ren(name);
  return node(t->kind, std::move(name), std::move(kids), std::move(src), std::move(tgt),
              t->label_var);
}

Tc subst_core(const Tc& t, const Ctx& z, const std::vector<Tc>& subs) {
  switch (t->kind) {
    case Kind::Mark: {
      for (size_t i = 0; i < t->src.size(); ++i)
        if (t->src[i] == t->name) return subs[i];
      raise(Err::Internal, "substitute: marker not in its own source");
    }
    case Kind::Nil: return node(Kind::Nil, "", {}, z, kAmp);
    case Kind::Emp: return node(Kind::Emp, "", {}, z, {});
    case Kind::Man: {
      // !_{y1,y2}[...] = ! @ (s1 (+) s2)
      Tc p = t_pair({subs[0], subs[1]});
      Tc man = node(Kind::Man, "", {}, p->tgt, kAmp);
      return node(Kind::Compose, "", {man, p}, z, kAmp);
    }
    case Kind::Edge:
      return node(Kind::Edge, t->name, {subst_core(t->kids[0], z, subs)}, z, kAmp,
                  t->label_var);
    case Kind::Compose: {
      Tc rhs = subst_core(t->kids[1], z, subs);
      return node(Kind::Compose, "", {t->kids[0], rhs}, z, t->tgt);
    }
    case Kind::Pair: {
      std::vector<Tc> kids;
      for (auto& k : t->kids) kids.push_back(subst_core(k, z, subs));
      return node(Kind::Pair, "", std::move(kids), z, t->tgt);
    }
    case Kind::Def:
      return node(Kind::Def, t->name, {subst_core(t->kids[0], z, subs)}, z, t->tgt);
    case Kind::Call:
      return node(Kind::Call, t->name, {subst_core(t->kids[0], z, subs)}, z, t->tgt);
    case Kind::Cycle: {
      Ctx b = t->tgt;
      Tc body = t->kids[0];
      // bound markers clashing with the new source are alpha-renamed fresh
      std::map<std::string, std::string> ren;
      std::set<std::string> used(z.begin(), z.end());
      collect_names(body, used);
      bool clash = false;
      Ctx bf;
      for (auto& m : b) {
        if (ctx_contains(z, m)) {
          clash = true;
          std::string fresh = m;
          do fresh += "'"; while (used.count(fresh));
          used.insert(fresh);
          ren[m] = fresh;
          bf.push_back(fresh);
        } else {
          bf.push_back(m);
        }
      }
      if (clash) body = rename_markers(body, ren);
      Ctx zb = ctx_concat(z, bf);
      std::vector<Tc> lifted;
      for (auto& s : subs) lifted.push_back(weaken(s, zb));
      for (auto& m : bf) lifted.push_back(t_mark(zb, m));
      Tc nb = subst_core(body, zb, lifted);
      Tc out = node(Kind::Cycle, "", {nb}, z, bf);
      return clash ? rename_target(out, b) : out;
    }
  }
  raise(Err::Internal, "substitute: unhandled kind");
}

}  // namespace

Tc substitute(const Tc& t, const SubstMap& s) {
  if (s.size() != t->src.size())
    raise(Err::DomainMismatch, "substitution domain has " + std::to_string(s.size()) +
                                   " markers for source <" + join(t->src) + ">");
  std::vector<Tc> subs;
  Ctx z;
  for (size_t i = 0; i < t->src.size(); ++i) {
    auto it = s.find(t->src[i]);
    if (it == s.end())
      raise(Err::DomainMismatch, "substitution misses marker " + t->src[i]);
    Tc img = it->second;
    if (img->tgt.size() != 1)
      raise(Err::DomainMismatch, "image of " + t->src[i] + " must have a singleton target");
    img = rename_target(img, kAmp);
    if (i == 0) z = img->src;
    else if (img->src != z)
      raise(Err::DomainMismatch, "substitution images disagree on the source context");
    subs.push_back(img);
  }
  if (t->src.empty()) return t;
  return subst_core(t, z, subs);
}

Tc weaken(const Tc& t, const Ctx& z) {
  check_ctx(z);
  if (t->src == z) return t;
  std::vector<Tc> subs;
  for (auto& y : t->src) subs.push_back(t_mark(z, y));
  return subst_core(t, z, subs);
}

Tc t_mark(const Ctx& src, const std::string& name) {
  if (!ctx_contains(src, name))
    raise(Err::UnboundMarker, name + " not in source context <" + join(src) + ">");
  return node(Kind::Mark, name, {}, src, kAmp);
}

Tc t_pair(std::vector<Tc> kids) {
  if (kids.empty()) raise(Err::Internal, "t_pair needs components");
  std::vector<Ctx> tgts;
  for (auto& k : kids) {
    if (k->src != kids[0]->src)
      raise(Err::ContextMismatch, "pair components must share a source context");
    tgts.push_back(k->tgt);
  }
  std::vector<Ctx> renamed = pair_rename(tgts);
  Ctx tgt;
  for (size_t i = 0; i < kids.size(); ++i) {
    kids[i] = rename_target(kids[i], renamed[i]);
    tgt.insert(tgt.end(), renamed[i].begin(), renamed[i].end());
  }
  Ctx src = kids[0]->src;
  return node(Kind::Pair, "", std::move(kids), std::move(src), std::move(tgt));
}

Tc proj(const Ctx& src, const Ctx& pick) {
  check_ctx(src);
  if (pick.empty()) return node(Kind::Emp, "", {}, src, {});
  std::vector<Tc> comps;
  for (auto& m : pick) {
    Tc mk = t_mark(src, m);
    comps.push_back(m == "&" ? mk : node(Kind::Def, m, {mk}, src, Ctx{m}));
  }
  if (comps.size() == 1) return comps[0];
  Ctx tgt = pick;
  check_ctx(tgt);
  return node(Kind::Pair, "", std::move(comps), src, std::move(tgt));
}

Tc proj_left(const Ctx& x, const Ctx& y) { return proj(ctx_concat(x, y), x); }
Tc proj_right(const Ctx& x, const Ctx& y) { return proj(ctx_concat(x, y), y); }
Tc identity_term(const Ctx& x) { return proj(x, x); }

Tc diagonal(const Ctx& x) { return t_pair({identity_term(x), identity_term(x)}); }

Tc swap_term(const Ctx& x, const Ctx& y) {
  Ctx xy = ctx_concat(x, y);
  return t_pair({proj(xy, y), proj(xy, x)});
}

Tc times(const Tc& t1, const Tc& t2) {
  Ctx y = ctx_concat(t1->src, t2->src);
  Tc a = node(Kind::Compose, "", {t1, proj(y, t1->src)}, y, t1->tgt);
  Tc b = node(Kind::Compose, "", {t2, proj(y, t2->src)}, y, t2->tgt);
  return t_pair({a, b});
}

Tc union_term(const Tc& t1, const Tc& t2) {
  Tc p = t_pair({t1, t2});
  if (p->tgt.size() != 2)
    raise(Err::ContextMismatch, "union needs two singleton-rooted components");
  Tc man = node(Kind::Man, "", {}, p->tgt, kAmp);
  return node(Kind::Compose, "", {man, p}, t1->src, kAmp);
}

}  // namespace uncal
