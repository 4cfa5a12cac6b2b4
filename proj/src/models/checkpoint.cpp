#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "trojanrec/error.hpp"
#include "trojanrec/models.hpp"

namespace trojanrec::models {

namespace {

using Eigen::Index;

constexpr std::string_view kMagic = "trojanrec-checkpoint v1";

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) { out_ << std::hexfloat; }
  ~Writer() { out_ << std::defaultfloat; }

  void scalar(std::string_view name, double value) { out_ << "scalar " << name << ' ' << value << '\n'; }

  template <typename Derived>
  void matrix(std::string_view name, const Eigen::DenseBase<Derived>& m) {
    out_ << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) out_ << (c ? " " : "") << m(r, c);
      out_ << '\n';
    }
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) throw ParseError("truncated checkpoint", line_ + 1);
    ++line_;
    return s;
  }

  std::string keyed(std::string_view key, std::string_view name) {
    std::istringstream ss(line());
    std::string k;
    std::string n;
    ss >> k >> n;
    if (k != key || n != name) {
      throw ParseError("expected " + std::string(key) + " '" + std::string(name) + "'", line_);
    }
    std::string rest;
    std::getline(ss, rest);
    return rest;
  }

  double scalar(std::string_view name) { return parse_double(keyed("scalar", name)); }

  Eigen::MatrixXd matrix(std::string_view name) {
    std::istringstream header(keyed("matrix", name));
    Index rows = 0;
    Index cols = 0;
    if (!(header >> rows >> cols) || rows < 0 || cols < 0) throw ParseError("bad matrix shape", line_);
    Eigen::MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      std::istringstream ss(line());
      std::string tok;
      for (Index c = 0; c < cols; ++c) {
        if (!(ss >> tok)) throw ParseError("short matrix row", line_);
        m(r, c) = parse_double(tok);
      }
    }
    return m;
  }

  Eigen::VectorXd vector(std::string_view name) {
    Eigen::MatrixXd m = matrix(name);
    if (m.cols() != 1) throw ParseError("expected a column vector", line_);
    return m.col(0);
  }

 private:
  double parse_double(const std::string& text) {
    const char* begin = text.c_str();
    while (*begin == ' ') ++begin;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("bad number", line_);
    return v;
  }

  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace

void save_checkpoint(std::ostream& out, const RecommenderParams& params) {
  out << kMagic << '\n' << "family " << to_string(family_of(params)) << '\n';
  Writer w(out);
  if (const auto* p = std::get_if<WrmfParams>(&params)) {
    w.scalar("l2_weight", p->l2_weight);
    w.scalar("confidence_weight", p->confidence_weight);
    w.matrix("user_factors", p->user_factors);
    w.matrix("item_factors", p->item_factors);
  } else if (const auto* p = std::get_if<ItemAeParams>(&params)) {
    w.scalar("tanh", p->activation == Activation::tanh ? 1.0 : 0.0);
    w.matrix("encoder_weight", p->encoder_weight);
    w.matrix("encoder_bias", p->encoder_bias);
    w.matrix("decoder_weight", p->decoder_weight);
    w.matrix("decoder_bias", p->decoder_bias);
  } else if (const auto* p = std::get_if<MultVaeParams>(&params)) {
    w.matrix("encoder_weight", p->encoder_weight);
    w.matrix("encoder_bias", p->encoder_bias);
    w.matrix("mean_weight", p->mean_weight);
    w.matrix("mean_bias", p->mean_bias);
    w.matrix("logvar_weight", p->logvar_weight);
    w.matrix("logvar_bias", p->logvar_bias);
    w.matrix("decoder_weight", p->decoder_weight);
    w.matrix("decoder_bias", p->decoder_bias);
  }
  out << "end\n";
}

RecommenderParams load_checkpoint(std::istream& in) {
  Reader r(in);
  if (r.line() != kMagic) throw ParseError("not a trojanrec checkpoint", 1);
  std::string fam_line = r.line();
  if (fam_line.rfind("family ", 0) != 0) throw ParseError("missing family", 2);
  auto family = parse_family(fam_line.substr(7));
  if (!family) throw ParseError("unknown family", 2);

  RecommenderParams result;
  switch (*family) {
    case Family::wrmf: {
      WrmfParams p;
      p.l2_weight = r.scalar("l2_weight");
      p.confidence_weight = r.scalar("confidence_weight");
      p.user_factors = r.matrix("user_factors");
      p.item_factors = r.matrix("item_factors");
      result = std::move(p);
      break;
    }
    case Family::item_ae: {
      ItemAeParams p;
      p.activation = r.scalar("tanh") != 0.0 ? Activation::tanh : Activation::identity;
      p.encoder_weight = r.matrix("encoder_weight");
      p.encoder_bias = r.vector("encoder_bias");
      p.decoder_weight = r.matrix("decoder_weight");
      p.decoder_bias = r.vector("decoder_bias");
      result = std::move(p);
      break;
    }
    case Family::mult_vae: {
      MultVaeParams p;
      p.encoder_weight = r.matrix("encoder_weight");
      p.encoder_bias = r.vector("encoder_bias");
      p.mean_weight = r.matrix("mean_weight");
      p.mean_bias = r.vector("mean_bias");
      p.logvar_weight = r.matrix("logvar_weight");
      p.logvar_bias = r.vector("logvar_bias");
      p.decoder_weight = r.matrix("decoder_weight");
      p.decoder_bias = r.vector("decoder_bias");
      result = std::move(p);
      break;
    }
  }
  if (r.line() != "end") throw ParseError("missing end marker", 0);
  return result;
}

}  // namespace trojanrec::models
