#include "beabr/departure.hpp"

#include <cmath>
#include <sstream>

#include "beabr/error.hpp"

namespace beabr {

void DepartureModel::validate() const {
  if (p < 0.0 || p > 1.0) throw InvalidArgument("completion probability p must be in [0, 1]");
  if (kind == DepartureKind::kLogarithmic && !(a > 0.0)) {
    throw InvalidArgument("skew coefficient a must be positive");
  }
  if (kind == DepartureKind::kFixed && !(fixed_s > 0.0)) {
    throw InvalidArgument("fixed departure time must be positive");
  }
}

DepartureModel DepartureModel::parse(const std::string& text, double p, double a) {
  DepartureModel m;
  m.p = p;
  m.a = a;
  if (text == "none") {
    m.kind = DepartureKind::kNone;
  } else if (text == "f1") {
    m.kind = DepartureKind::kUniform;
  } else if (text == "f2") {
    m.kind = DepartureKind::kLogarithmic;
  } else if (text.rfind("fixed:", 0) == 0) {
    m.kind = DepartureKind::kFixed;
    try {
      std::size_t used = 0;
      m.fixed_s = std::stod(text.substr(6), &used);
      if (used != text.size() - 6) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InvalidArgument("bad fixed departure '" + text + "'");
    }
  } else {
    throw InvalidArgument("unknown departure model '" + text + "' (none|f1|f2|fixed:<s>)");
  }
  m.validate();
  return m;
}

std::string DepartureModel::label() const {
  switch (kind) {
    case DepartureKind::kNone: return "none";
    case DepartureKind::kUniform: return "f1";
    case DepartureKind::kLogarithmic: return "f2";
    case DepartureKind::kFixed: {
      std::ostringstream os;
      os << "fixed:" << fixed_s;
      return os.str();
    }
  }
  return "none";
}

double sample_departure_ratio(const DepartureModel& model, std::mt19937_64& rng) {
  model.validate();
  if (model.kind == DepartureKind::kNone) return 1.0;
  if (model.kind == DepartureKind::kFixed) {
    throw InvalidArgument("fixed departures have no sampled ratio");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  if (u >= 1.0 - model.p) return 1.0;
  double x = u / (1.0 - model.p);
  double r = model.kind == DepartureKind::kUniform
                 ? x
                 : (std::pow(1.0 + model.a, x) - 1.0) / model.a;
  return r;
}

double sample_departure(const DepartureModel& model, double video_duration_s,
                        std::mt19937_64& rng) {
  if (!(video_duration_s > 0.0)) throw InvalidArgument("video duration must be positive");
  if (model.kind == DepartureKind::kFixed) {
    model.validate();
    return model.fixed_s;
  }
  return sample_departure_ratio(model, rng) * video_duration_s;
}

}  // namespace beabr
