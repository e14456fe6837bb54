#include "knock/mapping.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "knock/error.hpp"

namespace knock {

namespace {

void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) throw Error(kind, message);
}

}  // namespace

MappingSpec::MappingSpec(unsigned address_bits, BitMatrix bank_matrix, BitMatrix row_matrix,
                         std::string label, bool row_masks_synthetic)
    : address_bits_(address_bits),
      bank_(std::move(bank_matrix)),
      row_(std::move(row_matrix)),
      label_(std::move(label)),
      row_masks_synthetic_(row_masks_synthetic) {
  require(address_bits >= 1 && address_bits <= kMaxWidth, ErrorKind::InvariantViolation,
          "address_bits must be in 1..64");
  require(bank_.width() == address_bits, ErrorKind::WidthMismatch,
          "bank matrix width differs from address_bits");
  require(row_.width() == address_bits, ErrorKind::WidthMismatch,
          "row matrix width differs from address_bits");
  require(bank_.row_count() + row_.row_count() <= address_bits, ErrorKind::InvariantViolation,
          "more masks than address bits");

  EchelonBasis basis;
  for (auto w : bank_.words()) {
    require(w != 0, ErrorKind::InvariantViolation, "bank mask is zero");
    require(basis.insert(w), ErrorKind::InvariantViolation,
            "bank mask " + to_hex(w) + " is a combination of the other bank masks");
  }
  for (auto w : row_.words()) {
    require(w != 0, ErrorKind::InvariantViolation, "row mask is zero");
    require(basis.insert(w), ErrorKind::InvariantViolation,
            "row mask " + to_hex(w) +
                " lies in the span of the bank masks and earlier row masks "
                "(rank([M;R]) must equal rank(M) + rank(R))");
  }
}

DramLocation locate(const MappingSpec& spec, const BitVector& a) {
  if (a.width() != spec.address_bits()) {
    throw Error(ErrorKind::WidthMismatch, "address width " + std::to_string(a.width()) +
                                              " vs spec width " +
                                              std::to_string(spec.address_bits()));
  }
  return {spec.bank_index(a.bits()), spec.row_index(a.bits()),
          static_cast<unsigned>(spec.k()), static_cast<unsigned>(spec.k_prime())};
}

bool is_conflict(const MappingSpec& spec, const BitVector& a, const BitVector& b) {
  if (a.width() != b.width()) {
    throw Error(ErrorKind::WidthMismatch, "address pair widths differ");
  }
  const auto la = locate(spec, a);
  const auto lb = locate(spec, b);
  return la.bank_index == lb.bank_index && la.row_index != lb.row_index;
}

// ------------------------------------------------------------ serialization

MappingSpec parse_spec(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("mapping spec: ") + e.what());
  }
  try {
    const unsigned n = doc.at("address_bits").get<unsigned>();
    if (n == 0 || n > kMaxWidth) {
      throw Error(ErrorKind::Parse, "mapping spec: address_bits must be in 1..64");
    }
    const auto bank = from_hex_list(doc.at("bank_masks").get<std::vector<std::string>>(), n);
    BitMatrix row(n);
    if (doc.contains("row_masks")) {
      row = from_hex_list(doc.at("row_masks").get<std::vector<std::string>>(), n);
    }
    const bool synthetic = doc.value("row_masks_synthetic", false);
    const std::string label = doc.value("label", std::string{});
    return MappingSpec(n, bank, row, label, synthetic);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("mapping spec: ") + e.what());
  }
}

std::string serialize_spec(const MappingSpec& spec) {
  nlohmann::ordered_json doc;
  doc["address_bits"] = spec.address_bits();
  doc["bank_masks"] = to_hex_list(spec.bank_matrix());
  doc["row_masks"] = to_hex_list(spec.row_matrix());
  doc["row_masks_synthetic"] = spec.row_masks_synthetic();
  doc["label"] = spec.label();
  return doc.dump(2) + "\n";
}

MappingSpec read_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open spec file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

void write_spec_file(const MappingSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write spec file " + path);
  out << serialize_spec(spec);
}

}  // namespace knock
