#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "smoothsr/cmaes.hpp"
#include "smoothsr/dataset.hpp"
#include "smoothsr/encoding.hpp"
#include "smoothsr/fla.hpp"
#include "smoothsr/objective.hpp"
#include "smoothsr/version.hpp"

namespace py = pybind11;
using namespace smoothsr;

namespace {

TreeConfig make_config(int depth, int num_vars,
                       const std::vector<std::string>& operators,
                       const std::string& leaf_mode) {
  TreeConfig tc;
  tc.depth = depth;
  tc.num_vars = num_vars;
  tc.operators.clear();
  for (const auto& name : operators) tc.operators.push_back(parse_op(name));
  tc.leaf_mode = parse_leaf_mode(leaf_mode);
  tc.validate();
  return tc;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Smooth symbolic regression core";
  m.attr("__version__") = kVersion;

  py::class_<GenotypeLayout>(m, "Layout")
      .def_property_readonly("depth",
                             [](const GenotypeLayout& l) {
                               return l.config.depth;
                             })
      .def_property_readonly("num_vars",
                             [](const GenotypeLayout& l) {
                               return l.config.num_vars;
                             })
      .def_property_readonly("operators",
                             [](const GenotypeLayout& l) {
                               std::vector<std::string> names;
                               for (Op op : l.config.operators)
                                 names.push_back(op_name(op));
                               return names;
                             })
      .def_property_readonly("leaf_mode",
                             [](const GenotypeLayout& l) {
                               return std::string(
                                   leaf_mode_name(l.config.leaf_mode));
                             })
      .def_readonly("op_weight_count", &GenotypeLayout::op_weight_count)
      .def_readonly("var_weight_count", &GenotypeLayout::var_weight_count)
      .def_readonly("total_dim", &GenotypeLayout::total_dim)
      .def("__repr__", [](const GenotypeLayout& l) {
        return "Layout(depth=" + std::to_string(l.config.depth) +
               ", num_vars=" + std::to_string(l.config.num_vars) +
               ", total_dim=" + std::to_string(l.total_dim) + ")";
      });

  m.def(
      "build_layout",
      [](int depth, int num_vars, const std::vector<std::string>& operators,
         const std::string& leaf_mode) {
        return build_layout(make_config(depth, num_vars, operators,
                                        leaf_mode));
      },
      py::arg("depth"), py::arg("num_vars"),
      py::arg("operators") = std::vector<std::string>{"add", "mul"},
      py::arg("leaf_mode") = "op_fold",
      "Index map for the fixed-tree genotype");

  m.def(
      "operator_mix_weights",
      [](const std::vector<double>& raw) {
        return operator_mix_weights(raw);
      },
      py::arg("raw"), "Stick-breaking map onto the operator simplex");

  m.def(
      "eval_smooth",
      [](const std::vector<double>& genotype, const GenotypeLayout& layout,
         const std::vector<double>& row) {
        return eval_smooth(genotype, layout, row);
      },
      py::arg("genotype"), py::arg("layout"), py::arg("row"));

  m.def(
      "predict",
      [](const std::vector<double>& genotype, const GenotypeLayout& layout,
         const std::vector<std::vector<double>>& rows) {
        std::vector<double> flat;
        const std::size_t n =
            static_cast<std::size_t>(layout.config.num_vars);
        flat.reserve(rows.size() * n);
        for (const auto& r : rows) {
          if (r.size() != n)
            throw std::invalid_argument("row length does not match num_vars");
          flat.insert(flat.end(), r.begin(), r.end());
        }
        return predict(genotype, layout, flat, rows.size());
      },
      py::arg("genotype"), py::arg("layout"), py::arg("rows"));

  m.def(
      "decode_formula",
      [](const std::vector<double>& genotype, const GenotypeLayout& layout,
         double threshold) {
        return decode(genotype, layout, threshold).render();
      },
      py::arg("genotype"), py::arg("layout"), py::arg("threshold") = 0.05,
      "Render the crisp tree for a genotype");

  m.def(
      "op_penalty",
      [](const std::vector<double>& genotype, const GenotypeLayout& layout) {
        return op_penalty(genotype, layout);
      },
      py::arg("genotype"), py::arg("layout"));

  m.def(
      "var_penalty",
      [](const std::vector<double>& genotype, const GenotypeLayout& layout,
         std::size_t allowance) {
        return var_penalty(genotype, layout, allowance);
      },
      py::arg("genotype"), py::arg("layout"), py::arg("allowance") = 2);

  m.def(
      "fitness_r2",
      [](const std::vector<double>& predictions,
         const std::vector<double>& targets) {
        return fitness_r2(predictions, targets);
      },
      py::arg("predictions"), py::arg("targets"));

  m.def(
      "gen_poly10",
      [](std::size_t rows, std::uint64_t seed, double lo, double hi) {
        const Dataset data = gen_poly10(rows, seed, lo, hi);
        std::vector<std::vector<double>> values(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          const auto row = data.row(r);
          values[r].assign(row.begin(), row.end());
        }
        py::dict out;
        out["names"] = data.variable_names;
        out["values"] = values;
        out["target"] = data.target;
        return out;
      },
      py::arg("rows"), py::arg("seed") = 1, py::arg("lo") = -1.0,
      py::arg("hi") = 1.0);

  m.def(
      "cmaes_minimize",
      [](const std::function<double(std::vector<double>)>& f,
         std::size_t dimension, std::vector<double> initial_mean,
         double sigma0, std::uint64_t max_evaluations,
         std::optional<double> target_value, std::uint64_t seed) {
        OptimizerConfig cfg;
        cfg.dimension = dimension;
        cfg.initial_mean = std::move(initial_mean);
        cfg.sigma0 = sigma0;
        cfg.max_evaluations = max_evaluations;
        cfg.target_value = target_value;
        cfg.seed = seed;
        cfg.threads = 1;  // python objectives hold the GIL
        const ObjectiveFn wrapped = [&f](std::span<const double> x,
                                         std::uint64_t) {
          return f(std::vector<double>(x.begin(), x.end()));
        };
        const RunTrace trace = cmaes_minimize(wrapped, cfg);
        py::dict out;
        out["best"] = trace.best;
        out["best_total"] = trace.best_total;
        out["evaluations"] = trace.evaluations;
        out["status"] = trace.status == RunStatus::completed ? "completed"
                        : trace.status == RunStatus::target_reached
                            ? "target_reached"
                            : "aborted_numerical";
        return out;
      },
      py::arg("f"), py::arg("dimension"),
      py::arg("initial_mean") = std::vector<double>{},
      py::arg("sigma0") = 0.5, py::arg("max_evaluations") = 10000,
      py::arg("target_value") = std::nullopt, py::arg("seed") = 1);

  m.def(
      "auto_correlation",
      [](const std::vector<double>& trace, std::size_t lag) {
        const auto ac = auto_correlation(trace, lag);
        return py::make_tuple(ac.value, ac.degenerate);
      },
      py::arg("trace"), py::arg("lag") = 1);

  m.def(
      "correlation_length",
      [](const std::vector<double>& trace) {
        return correlation_length(trace);
      },
      py::arg("trace"));

  m.def(
      "information_analysis",
      [](const std::vector<double>& trace, double epsilon) {
        const auto info = information_analysis(trace, epsilon);
        py::dict out;
        out["information_content"] = info.information_content;
        out["density_basin_information"] = info.density_basin_information;
        out["partial_information_content"] =
            info.partial_information_content;
        out["information_stability"] = info.information_stability;
        return out;
      },
      py::arg("trace"), py::arg("epsilon") = 0.0);
}
