#pragma once

// Topology of a multi-inverter AC network and per-frequency assembly of the
// 2n x 2n dq nodal admittance matrix. Node i (file order, 0-based index k)
// owns rows/cols 2k (d) and 2k+1 (q).

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dampplan/component_models.hpp"

namespace dampplan {

enum class BranchKind { Rl, PiCable, Transformer };

struct Branch {
  BranchKind kind = BranchKind::Rl;
  int from = 0;
  int to = 0;
  double r_ohm = 0.0;
  double l_h = 0.0;
  double c_f = 0.0;          ///< pi cable only: total shunt capacitance
  double turns_ratio = 1.0;  ///< impedances divided by ratio^2, C multiplied
};

/// Ideal grid behind a series R-L (optionally a cable with total capacitance
/// c_f). The ideal source is a small-signal short, so this stamps as a shunt:
/// (R + sL)^-1 plus the near-end C/2.
struct GridParams {
  double r_ohm = 0.0;
  double l_h = 0.0;
  double c_f = 0.0;
  double turns_ratio = 1.0;
};

struct CapacitorParams {
  double c_f = 0.0;
};

struct InverterDevice {
  std::variant<InverterParams, std::shared_ptr<const AdmittanceTable>> model;
  std::string table_path;  ///< as written in the network file, if tabulated
};

enum class ShuntKind { Inverter, ActiveDamper, Grid, Capacitor };

struct Shunt {
  int node = 0;
  std::variant<InverterDevice, ADParams, GridParams, CapacitorParams> device;

  ShuntKind kind() const { return static_cast<ShuntKind>(device.index()); }
  bool passive() const { return kind() == ShuntKind::Grid || kind() == ShuntKind::Capacitor; }
};

struct NetworkGraph {
  std::vector<int> nodes;  ///< ids in file order
  std::vector<Branch> branches;
  std::vector<Shunt> shunts;
  double omega0 = kDefaultOmega0;
  std::optional<ADParams> ad_defaults;  ///< damper design carried by the file, if any
  std::vector<std::string> assumptions;

  /// 0-based position of a node id, or -1.
  int index_of(int node_id) const;
  std::size_t size() const { return nodes.size(); }
};

const char* to_string(BranchKind kind);
const char* to_string(ShuntKind kind);

/// Empty iff the graph is analyzable. Never throws.
std::vector<std::string> validate(const NetworkGraph& g);

/// Throws Error(Validation) listing every diagnostic.
void require_valid(const NetworkGraph& g);

struct NodalAdmittance {
  double f_hz = 0.0;
  std::vector<int> node_ids;
  Eigen::MatrixXcd matrix;

  DqBlock block(std::size_t i, std::size_t j) const;
};

/// Series admittance Z_b^-1 of a branch. Throws Error(SingularBranch).
DqBlock branch_series_admittance(const Branch& b, double f_hz, double omega0);
/// Admittance of a passive shunt device at its node.
DqBlock grid_shunt_admittance(const GridParams& p, double f_hz, double omega0);

/// Precompiled network: validated once, evaluated per frequency.
class Assembler {
 public:
  explicit Assembler(NetworkGraph g);

  const NetworkGraph& graph() const { return graph_; }

  NodalAdmittance operator()(double f_hz) const;

  /// Y_nod = passive network part + device part.
  struct Parts {
    Eigen::MatrixXcd network;
    Eigen::MatrixXcd devices;
  };
  Parts parts(double f_hz) const;

 private:
  void stamp(Eigen::MatrixXcd& net, Eigen::MatrixXcd& dev, double f_hz) const;

  NetworkGraph graph_;
  std::vector<std::optional<ActiveDamper>> dampers_;  // per shunt
};

NodalAdmittance assemble(const NetworkGraph& g, double f_hz);

/// Copy of a with y added to node_id's diagonal block.
NodalAdmittance with_shunt(const NodalAdmittance& a, int node_id, const DqBlock& y);

void add_block(Eigen::MatrixXcd& m, std::size_t i, std::size_t j, const DqBlock& b);

}  // namespace dampplan
