#include "otg/urdf.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "otg/error.hpp"

namespace otg {
namespace {

namespace pt = boost::property_tree;

Eigen::Vector3d parse_triple(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  Eigen::Vector3d v;
  if (!(in >> v.x() >> v.y() >> v.z())) throw Error(ErrorKind::Parse, "expected three numbers in " + what + ": '" + text + "'");
  std::string rest;
  if (in >> rest) throw Error(ErrorKind::Parse, "trailing data in " + what + ": '" + text + "'");
  return v;
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, "expected a number for " + what + ": '" + text + "'");
  }
  if (text.find_first_not_of(" \t", used) != std::string::npos) {
    throw Error(ErrorKind::Parse, "expected a number for " + what + ": '" + text + "'");
  }
  return v;
}

std::optional<std::string> attribute(const pt::ptree& node, const std::string& key) {
  if (auto v = node.get_optional<std::string>("<xmlattr>." + key)) return *v;
  return std::nullopt;
}

std::string required_attribute(const pt::ptree& node, const std::string& key, const std::string& context) {
  auto v = attribute(node, key);
  if (!v || v->empty()) throw Error(ErrorKind::Validation, context + " is missing attribute '" + key + "'");
  return *v;
}

std::string format(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string format(const Eigen::Vector3d& v) { return format(v.x()) + " " + format(v.y()) + " " + format(v.z()); }

UrdfJoint parse_joint(const pt::ptree& node) {
  UrdfJoint j;
  j.name = required_attribute(node, "name", "joint");
  const std::string context = "joint '" + j.name + "'";
  const std::string type = required_attribute(node, "type", context);
  try {
    j.type = parse_joint_type(type);
  } catch (const Error&) {
    throw Error(ErrorKind::Validation, context + " has unsupported type '" + type + "'");
  }
  const auto parent = node.get_child_optional("parent");
  const auto child = node.get_child_optional("child");
  if (!parent || !child) throw Error(ErrorKind::Validation, context + " needs parent and child elements");
  j.parent = required_attribute(*parent, "link", context + " parent");
  j.child = required_attribute(*child, "link", context + " child");

  if (const auto origin = node.get_child_optional("origin")) {
    if (auto xyz = attribute(*origin, "xyz")) j.origin.xyz = parse_triple(*xyz, context + " origin xyz");
    if (auto rpy = attribute(*origin, "rpy")) j.origin.rpy = parse_triple(*rpy, context + " origin rpy");
  }
  if (const auto axis = node.get_child_optional("axis")) {
    if (auto xyz = attribute(*axis, "xyz")) j.axis = parse_triple(*xyz, context + " axis");
  }
  if (j.movable()) {
    const double n = j.axis.norm();
    if (!(n > 0.0)) throw Error(ErrorKind::Validation, context + " has a zero axis");
    j.axis /= n;
  }

  if (const auto limit = node.get_child_optional("limit")) {
    JointLimit l;
    const auto get = [&](const char* key, double fallback) {
      auto v = attribute(*limit, key);
      return v ? parse_number(*v, context + " limit " + key) : fallback;
    };
    l.lower = get("lower", 0.0);
    l.upper = get("upper", 0.0);
    l.effort = get("effort", 0.0);
    l.velocity = get("velocity", 0.0);
    j.limit = l;
  }

  if (j.type == JointType::Revolute || j.type == JointType::Prismatic) {
    if (!j.limit) throw Error(ErrorKind::Validation, context + " (" + type + ") has no limit element");
    if (!(j.limit->lower <= j.limit->upper)) throw Error(ErrorKind::Validation, context + " has lower > upper");
  }
  if (j.movable() && j.limit && !(j.limit->velocity > 0.0)) {
    throw Error(ErrorKind::Validation, context + " needs a positive velocity limit");
  }
  if (j.type == JointType::Continuous) {
    if (!j.limit) throw Error(ErrorKind::Validation, context + " (continuous) has no limit element for its velocity");
    j.limit->lower = -std::numeric_limits<double>::infinity();
    j.limit->upper = std::numeric_limits<double>::infinity();
  }
  return j;
}

void resolve_topology(RobotModel& m) {
  const std::set<std::string> links(m.links.begin(), m.links.end());
  if (links.size() != m.links.size()) throw Error(ErrorKind::Validation, "duplicate link names");
  std::map<std::string, std::size_t> parent_joint;
  std::set<std::string> joint_names;
  for (std::size_t i = 0; i < m.joints.size(); ++i) {
    const auto& j = m.joints[i];
    if (!joint_names.insert(j.name).second) throw Error(ErrorKind::Validation, "duplicate joint name '" + j.name + "'");
    if (!links.count(j.parent) || !links.count(j.child)) {
      throw Error(ErrorKind::Topology, "joint '" + j.name + "' references an unknown link");
    }
    if (!parent_joint.emplace(j.child, i).second) {
      throw Error(ErrorKind::Topology, "link '" + j.child + "' has more than one parent joint");
    }
  }
  std::vector<std::string> roots;
  for (const auto& l : m.links) {
    if (!parent_joint.count(l)) roots.push_back(l);
  }
  if (roots.size() != 1) {
    throw Error(ErrorKind::Topology,
                roots.empty() ? "kinematic tree has a cycle" : "links are not connected into a single tree (" +
                                                                   std::to_string(roots.size()) + " roots)");
  }
  // Every link must reach the root without revisiting.
  for (const auto& l : m.links) {
    std::string cur = l;
    std::size_t steps = 0;
    while (cur != roots.front()) {
      cur = m.joints[parent_joint.at(cur)].parent;
      if (++steps > m.links.size()) throw Error(ErrorKind::Topology, "kinematic tree has a cycle");
    }
  }

  std::set<std::string> has_child;
  for (const auto& j : m.joints) has_child.insert(j.parent);
  std::vector<std::string> leaves;
  for (const auto& l : m.links) {
    if (!has_child.count(l)) leaves.push_back(l);
  }
  m.chain.clear();
  if (leaves.size() == 1 && leaves.front() != roots.front()) m.chain = m.chain_between(roots.front(), leaves.front());
}

}  // namespace

const char* to_string(JointType type) noexcept {
  switch (type) {
    case JointType::Revolute: return "revolute";
    case JointType::Continuous: return "continuous";
    case JointType::Prismatic: return "prismatic";
    case JointType::Fixed: return "fixed";
  }
  return "fixed";
}

JointType parse_joint_type(const std::string& text) {
  if (text == "revolute") return JointType::Revolute;
  if (text == "continuous") return JointType::Continuous;
  if (text == "prismatic") return JointType::Prismatic;
  if (text == "fixed") return JointType::Fixed;
  throw Error(ErrorKind::Validation, "unsupported joint type '" + text + "'");
}

Eigen::Isometry3d Origin::transform() const {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translation() = xyz;
  t.linear() = (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
                   .toRotationMatrix();
  return t;
}

std::string RobotModel::root_link() const {
  std::set<std::string> children;
  for (const auto& j : joints) children.insert(j.child);
  for (const auto& l : links) {
    if (!children.count(l)) return l;
  }
  return {};
}

const UrdfJoint* RobotModel::find_joint(const std::string& joint_name) const {
  for (const auto& j : joints) {
    if (j.name == joint_name) return &j;
  }
  return nullptr;
}

bool RobotModel::has_link(const std::string& link) const {
  return std::find(links.begin(), links.end(), link) != links.end();
}

std::vector<std::size_t> RobotModel::chain_between(const std::string& base, const std::string& tip) const {
  if (!has_link(base)) throw Error(ErrorKind::ChainResolution, "base link '" + base + "' not found");
  if (!has_link(tip)) throw Error(ErrorKind::ChainResolution, "tip link '" + tip + "' not found");
  std::vector<std::size_t> path;
  std::string cur = tip;
  while (cur != base) {
    const auto it = std::find_if(joints.begin(), joints.end(), [&](const UrdfJoint& j) { return j.child == cur; });
    if (it == joints.end() || path.size() > joints.size()) {
      throw Error(ErrorKind::ChainResolution, "no serial chain from '" + base + "' to '" + tip + "'");
    }
    path.push_back(static_cast<std::size_t>(it - joints.begin()));
    cur = it->parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t RobotModel::dof() const {
  return static_cast<std::size_t>(
      std::count_if(joints.begin(), joints.end(), [](const UrdfJoint& j) { return j.movable(); }));
}

RobotModel parse_urdf(const std::string& document) {
  pt::ptree tree;
  try {
    std::istringstream in(document);
    pt::read_xml(in, tree, pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorKind::Parse, "line " + std::to_string(e.line()) + ": " + e.message());
  }
  if (tree.size() != 1 || tree.begin()->first != "robot") {
    throw Error(ErrorKind::Parse, "document must have a single <robot> root element");
  }
  const pt::ptree& robot = tree.begin()->second;
  RobotModel m;
  m.name = attribute(robot, "name").value_or("");
  for (const auto& [tag, node] : robot) {
    if (tag == "link") {
      m.links.push_back(required_attribute(node, "name", "link"));
    } else if (tag == "joint") {
      m.joints.push_back(parse_joint(node));
    }
  }
  if (m.links.empty()) throw Error(ErrorKind::Validation, "robot has no links");
  resolve_topology(m);
  return m;
}

RobotModel load_urdf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Input, "cannot open URDF file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_urdf(buf.str());
}

std::string serialize_urdf(const RobotModel& model) {
  pt::ptree robot;
  robot.put("<xmlattr>.name", model.name);
  for (const auto& l : model.links) {
    pt::ptree link;
    link.put("<xmlattr>.name", l);
    robot.add_child("link", link);
  }
  for (const auto& j : model.joints) {
    pt::ptree joint;
    joint.put("<xmlattr>.name", j.name);
    joint.put("<xmlattr>.type", to_string(j.type));
    joint.put("parent.<xmlattr>.link", j.parent);
    joint.put("child.<xmlattr>.link", j.child);
    joint.put("origin.<xmlattr>.xyz", format(j.origin.xyz));
    joint.put("origin.<xmlattr>.rpy", format(j.origin.rpy));
    if (j.movable()) joint.put("axis.<xmlattr>.xyz", format(j.axis));
    if (j.limit) {
      if (j.type != JointType::Continuous) {
        joint.put("limit.<xmlattr>.lower", format(j.limit->lower));
        joint.put("limit.<xmlattr>.upper", format(j.limit->upper));
      }
      joint.put("limit.<xmlattr>.effort", format(j.limit->effort));
      joint.put("limit.<xmlattr>.velocity", format(j.limit->velocity));
    }
    robot.add_child("joint", joint);
  }
  pt::ptree doc;
  doc.add_child("robot", robot);
  std::ostringstream out;
  pt::write_xml(out, doc, pt::xml_writer_make_settings<std::string>(' ', 2));
  return out.str();
}

bool equivalent(const RobotModel& a, const RobotModel& b, double tol) {
  const auto close = [tol](double x, double y) { return x == y || std::abs(x - y) <= tol; };
  const auto close3 = [tol](const Eigen::Vector3d& x, const Eigen::Vector3d& y) { return (x - y).lpNorm<Eigen::Infinity>() <= tol; };
  if (a.name != b.name || a.links != b.links || a.chain != b.chain || a.joints.size() != b.joints.size()) return false;
  for (std::size_t i = 0; i < a.joints.size(); ++i) {
    const auto& x = a.joints[i];
    const auto& y = b.joints[i];
    if (x.name != y.name || x.type != y.type || x.parent != y.parent || x.child != y.child) return false;
    if (!close3(x.origin.xyz, y.origin.xyz) || !close3(x.origin.rpy, y.origin.rpy)) return false;
    if (x.movable() && !close3(x.axis, y.axis)) return false;
    if (x.limit.has_value() != y.limit.has_value()) return false;
    if (x.limit && !(close(x.limit->lower, y.limit->lower) && close(x.limit->upper, y.limit->upper) &&
                     close(x.limit->velocity, y.limit->velocity) && close(x.limit->effort, y.limit->effort))) {
      return false;
    }
  }
  return true;
}

}  // namespace otg
