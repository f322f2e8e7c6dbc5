#include "hetens/serialize.hpp"

namespace hetens {

void write_hyper(ByteWriter& w, const HyperParams& h) {
  w.f64(h.svm_c);
  w.f64(h.svm_gamma);
  w.u64(h.mlp_hidden);
  w.u64(h.tree_mtry);
}

HyperParams read_hyper(ByteReader& r) {
  HyperParams h;
  h.svm_c = r.f64();
  h.svm_gamma = r.f64();
  h.mlp_hidden = r.u64();
  h.tree_mtry = r.u64();
  return h;
}

void write_standardizer(ByteWriter& w, const Standardizer& s) {
  w.f64s(s.mean);
  w.f64s(s.scale);
  w.sizes(s.degenerate);
}

Standardizer read_standardizer(ByteReader& r) {
  Standardizer s;
  s.mean = r.f64s();
  s.scale = r.f64s();
  s.degenerate = r.sizes();
  if (s.mean.size() != s.scale.size()) throw DataError("corrupt container: scaler shape mismatch");
  return s;
}

namespace {

void write_payload(ByteWriter& w, const TreeModel& t) {
  w.u64(t.nodes.size());
  for (const auto& n : t.nodes) {
    w.i32(n.feature);
    w.f64(n.threshold);
    w.i32(n.left);
    w.i32(n.right);
    w.i32(n.label);
  }
}

void write_payload(ByteWriter& w, const MlpModel& m) {
  w.u64(m.inputs);
  w.u64(m.hidden);
  w.u64(m.outputs);
  w.f64s(m.w_hidden);
  w.f64s(m.w_output);
}

void write_payload(ByteWriter& w, const SvmModel& s) {
  w.f64(s.gamma);
  w.f64(s.c);
  w.u64(s.dims);
  w.u8(s.converged ? 1 : 0);
  w.u64(s.iterations);
  w.u64(s.machines.size());
  for (const auto& m : s.machines) {
    w.i32(m.positive);
    w.i32(m.negative);
    w.f64(m.bias);
    w.f64s(m.coef);
    w.f64s(m.support);
  }
}

TreeModel read_tree(ByteReader& r, std::size_t dims, std::size_t k) {
  TreeModel t;
  t.nodes.resize(r.length(24));
  const auto count = static_cast<std::int32_t>(t.nodes.size());
  if (count == 0) throw DataError("corrupt container: empty tree");
  for (std::int32_t i = 0; i < count; ++i) {
    auto& n = t.nodes[static_cast<std::size_t>(i)];
    n.feature = r.i32();
    n.threshold = r.f64();
    n.left = r.i32();
    n.right = r.i32();
    n.label = r.i32();
    if (n.label < 0 || static_cast<std::size_t>(n.label) >= k) throw DataError("corrupt container: tree label");
    // Children always follow their parent, which rules out cycles.
    if (n.feature >= 0 && (static_cast<std::size_t>(n.feature) >= dims || n.left <= i || n.right <= i ||
                           n.left >= count || n.right >= count)) {
      throw DataError("corrupt container: tree node links");
    }
  }
  return t;
}

MlpModel read_mlp(ByteReader& r) {
  MlpModel m;
  m.inputs = r.u64();
  m.hidden = r.u64();
  m.outputs = r.u64();
  m.w_hidden = r.f64s();
  m.w_output = r.f64s();
  if (m.w_hidden.size() != m.hidden * (m.inputs + 1) || m.w_output.size() != m.outputs * (m.hidden + 1)) {
    throw DataError("corrupt container: MLP weight shapes");
  }
  return m;
}

SvmModel read_svm(ByteReader& r) {
  SvmModel s;
  s.gamma = r.f64();
  s.c = r.f64();
  s.dims = r.u64();
  s.converged = r.u8() != 0;
  s.iterations = r.u64();
  s.machines.resize(r.length(24));
  for (auto& m : s.machines) {
    m.positive = r.i32();
    m.negative = r.i32();
    m.bias = r.f64();
    m.coef = r.f64s();
    m.support = r.f64s();
    if (m.support.size() != m.coef.size() * s.dims) throw DataError("corrupt container: SVM support shape");
  }
  return s;
}

}  // namespace

void write_model(ByteWriter& w, const BaseModel& m) {
  w.u8(static_cast<std::uint8_t>(m.kind));
  write_hyper(w, m.hyper);
  w.u8(m.train_indices.with_replacement ? 1 : 0);
  w.sizes(m.train_indices.indices);
  w.u64(m.dims);
  w.u64(m.num_classes);
  std::visit([&](const auto& p) { write_payload(w, p); }, m.payload);
}

BaseModel read_model(ByteReader& r) {
  BaseModel m;
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(LearnerKind::kSvm)) throw DataError("corrupt container: unknown model kind");
  m.kind = static_cast<LearnerKind>(kind);
  m.hyper = read_hyper(r);
  m.train_indices.with_replacement = r.u8() != 0;
  m.train_indices.indices = r.sizes();
  m.dims = r.u64();
  m.num_classes = r.u64();
  switch (m.kind) {
    case LearnerKind::kTree:
      m.payload = read_tree(r, m.dims, m.num_classes);
      break;
    case LearnerKind::kMlp: {
      auto net = read_mlp(r);
      if (net.inputs != m.dims || net.outputs != m.num_classes) throw DataError("corrupt container: MLP shape");
      m.payload = std::move(net);
      break;
    }
    case LearnerKind::kSvm: {
      auto svm = read_svm(r);
      if (svm.dims != m.dims) throw DataError("corrupt container: SVM dims");
      for (const auto& mc : svm.machines) {
        if (mc.positive < 0 || mc.negative < 0 || static_cast<std::size_t>(mc.positive) >= m.num_classes ||
            static_cast<std::size_t>(mc.negative) >= m.num_classes) {
          throw DataError("corrupt container: SVM class ids");
        }
      }
      if (svm.machines.empty()) throw DataError("corrupt container: SVM without machines");
      m.payload = std::move(svm);
      break;
    }
  }
  return m;
}

}  // namespace hetens
