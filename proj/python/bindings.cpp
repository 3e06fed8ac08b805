#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "volrob/cli.hpp"
#include "volrob/harness.hpp"
#include "volrob/nifti.hpp"

namespace py = pybind11;
using namespace volrob;

namespace {

Volume volume_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
  if (arr.ndim() != 3) throw py::value_error("volume array must be 3-D");
  Volume v;
  v.shape = {static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
             static_cast<int>(arr.shape(2))};
  v.data.assign(arr.data(), arr.data() + arr.size());
  v.validate();
  return v;
}

py::array_t<float> volume_to_array(const Volume& v) {
  py::array_t<float> arr({v.shape[0], v.shape[1], v.shape[2]});
  std::copy(v.data.begin(), v.data.end(), arr.mutable_data());
  return arr;
}

LabelVolume labels_from_array(
    py::array_t<std::int32_t, py::array::c_style | py::array::forcecast> arr, int num_classes) {
  if (arr.ndim() != 3) throw py::value_error("label array must be 3-D");
  LabelVolume l;
  l.shape = {static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
             static_cast<int>(arr.shape(2))};
  l.labels.assign(arr.data(), arr.data() + arr.size());
  if (num_classes <= 0) {
    std::int32_t mx = 0;
    for (const auto v : l.labels) mx = std::max(mx, v);
    num_classes = std::max(2, mx + 1);
  }
  l.num_classes = num_classes;
  l.validate();
  return l;
}

py::array_t<std::int32_t> labels_to_array(const LabelVolume& l) {
  py::array_t<std::int32_t> arr({l.shape[0], l.shape[1], l.shape[2]});
  std::copy(l.labels.begin(), l.labels.end(), arr.mutable_data());
  return arr;
}

py::array_t<double> logits_to_array(const Logits& l) {
  py::array_t<double> arr({l.num_classes, l.shape[0], l.shape[1], l.shape[2]});
  std::copy(l.data.begin(), l.data.end(), arr.mutable_data());
  return arr;
}

py::array_t<double> field_to_array(const GradientField& g) {
  py::array_t<double> arr({g.shape[0], g.shape[1], g.shape[2]});
  std::copy(g.values.begin(), g.values.end(), arr.mutable_data());
  return arr;
}

LossSpec loss_from_name(const std::string& name) {
  if (name == "soft-dice") return LossSpec::soft_dice();
  if (name == "cross-entropy") return LossSpec::cross_entropy();
  if (name == "cosine-weighted-cross-entropy") return LossSpec::cosine_weighted_ce();
  if (name == "composite") return LossSpec::composite();
  throw py::value_error("unknown loss '" + name + "'");
}

py::dict outcome_to_dict(const AttackOutcome& o) {
  py::dict d;
  d["x_adv"] = volume_to_array(o.x_adv);
  d["trace"] = o.trace;
  d["linf"] = o.stats.linf;
  d["l2"] = o.stats.l2;
  d["mean_abs"] = o.stats.mean_abs;
  if (!o.tables.empty()) {
    py::list tables;
    for (const auto& t : o.tables) {
      py::array_t<double> arr({t.p, t.p, t.p});
      std::copy(t.values.begin(), t.values.end(), arr.mutable_data());
      tables.append(arr);
    }
    d["quant_tables"] = tables;
  }
  return d;
}

py::object json_to_py(const nlohmann::json& j) {
  auto loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

nlohmann::json py_to_json(const py::object& obj) {
  auto dumps = py::module_::import("json").attr("dumps");
  return nlohmann::json::parse(dumps(obj).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_volrob, m) {
  m.doc() = "Adversarial robustness toolkit for volumetric segmentation";

  py::class_<SegModel>(m, "SegModel")
      .def_property_readonly("arch", [](const SegModel& s) { return std::string(arch_id(s.arch)); })
      .def_readonly("num_classes", &SegModel::num_classes)
      .def_property_readonly("window",
                             [](const SegModel& s) {
                               return py::make_tuple(s.window[0], s.window[1], s.window[2]);
                             })
      .def_readonly("seed", &SegModel::seed)
      .def_property_readonly("param_count", &SegModel::param_count);

  m.def(
      "generate_phantom",
      [](std::uint64_t seed, std::tuple<int, int, int> shape, int num_classes, double noise,
         int min_blobs, int max_blobs) {
        PhantomSpec spec;
        spec.seed = seed;
        spec.shape = {std::get<0>(shape), std::get<1>(shape), std::get<2>(shape)};
        spec.num_classes = num_classes;
        spec.noise_amplitude = noise;
        spec.min_blobs = min_blobs;
        spec.max_blobs = max_blobs;
        const auto [image, labels] = generate_phantom(spec);
        return py::make_tuple(volume_to_array(image), labels_to_array(labels));
      },
      py::arg("seed"), py::arg("shape") = std::make_tuple(32, 32, 32), py::arg("num_classes") = 3,
      py::arg("noise") = 0.05, py::arg("min_blobs") = 2, py::arg("max_blobs") = 4);

  m.def(
      "build_model",
      [](const std::string& arch, int num_classes, std::tuple<int, int, int> window,
         std::uint64_t seed) {
        return build_model(arch, num_classes,
                           {std::get<0>(window), std::get<1>(window), std::get<2>(window)}, seed);
      },
      py::arg("arch"), py::arg("num_classes"), py::arg("window"), py::arg("seed") = 0);

  m.def(
      "train_model",
      [](const SegModel& model, const py::list& images, const py::list& labels, int epochs,
         double lr, std::uint64_t seed) {
        std::vector<std::pair<Volume, LabelVolume>> data;
        for (std::size_t i = 0; i < images.size(); ++i) {
          data.emplace_back(volume_from_array(py::cast<py::array_t<float>>(images[i])),
                            labels_from_array(py::cast<py::array_t<std::int32_t>>(labels[i]),
                                              model.num_classes));
        }
        TrainResult r = train_model(model, data, epochs, lr, seed);
        return py::make_tuple(r.model, r.epoch_loss);
      },
      py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("epochs") = 10,
      py::arg("lr") = 0.05, py::arg("seed") = 0);

  m.def("save_model", [](const SegModel& model, const std::string& path) {
    save_model(model, path);
  });
  m.def("load_model", &load_model);

  m.def("forward", [](const SegModel& model, py::array_t<float> x) {
    return logits_to_array(forward(model, volume_from_array(x)));
  });

  m.def("softmax_channels", [](py::array_t<double, py::array::c_style> logits) {
    if (logits.ndim() != 4) throw py::value_error("logits must be (C,H,W,D)");
    Logits l({static_cast<int>(logits.shape(1)), static_cast<int>(logits.shape(2)),
              static_cast<int>(logits.shape(3))},
             static_cast<int>(logits.shape(0)));
    std::copy(logits.data(), logits.data() + logits.size(), l.data.begin());
    return logits_to_array(softmax_channels(l));
  });

  m.def("predict_labels", [](const SegModel& model, py::array_t<float> x) {
    return labels_to_array(predict_labels(forward(model, volume_from_array(x))));
  });

  m.def(
      "loss_value",
      [](const SegModel& model, py::array_t<float> x, py::array_t<std::int32_t> y,
         const std::string& loss) {
        return loss_value(model, volume_from_array(x), labels_from_array(y, model.num_classes),
                          loss_from_name(loss));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("loss") = "soft-dice");

  m.def(
      "input_gradient",
      [](const SegModel& model, py::array_t<float> x, py::array_t<std::int32_t> y,
         const std::string& loss) {
        return field_to_array(input_gradient(model, volume_from_array(x),
                                             labels_from_array(y, model.num_classes),
                                             loss_from_name(loss)));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("loss") = "soft-dice");

  m.def(
      "gaussian_noise",
      [](py::array_t<float> x, double epsilon, std::uint64_t seed) {
        return outcome_to_dict(gaussian_noise(volume_from_array(x), epsilon, seed));
      },
      py::arg("x"), py::arg("epsilon"), py::arg("seed") = 0);

  auto pixel_cfg = [](double epsilon, double alpha, int steps, std::uint64_t seed) {
    PixelAttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.alpha = alpha;
    cfg.steps = steps;
    cfg.seed = seed;
    return cfg;
  };

  m.def(
      "fgsm",
      [pixel_cfg](const SegModel& model, py::array_t<float> x, py::array_t<std::int32_t> y,
                  double epsilon) {
        return outcome_to_dict(fgsm(model, volume_from_array(x),
                                    labels_from_array(y, model.num_classes),
                                    pixel_cfg(epsilon, 0.0, 1, 0)));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("epsilon") = 8.0 / 255.0);

  m.def(
      "pgd",
      [pixel_cfg](const SegModel& model, py::array_t<float> x, py::array_t<std::int32_t> y,
                  double epsilon, double alpha, int steps) {
        return outcome_to_dict(pgd(model, volume_from_array(x),
                                   labels_from_array(y, model.num_classes),
                                   pixel_cfg(epsilon, alpha, steps, 0)));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("epsilon") = 8.0 / 255.0,
      py::arg("alpha") = 0.0, py::arg("steps") = 20);

  m.def(
      "cospgd",
      [pixel_cfg](const SegModel& model, py::array_t<float> x, py::array_t<std::int32_t> y,
                  double epsilon, double alpha, int steps) {
        return outcome_to_dict(cospgd(model, volume_from_array(x),
                                      labels_from_array(y, model.num_classes),
                                      pixel_cfg(epsilon, alpha, steps, 0)));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("epsilon") = 8.0 / 255.0,
      py::arg("alpha") = 0.0, py::arg("steps") = 20);

  m.def(
      "vafa",
      [](const SegModel& model, py::array_t<float> x, py::array_t<std::int32_t> y, double q_max,
         int patch, int steps, double step_size) {
        VafaConfig cfg;
        cfg.q_max = q_max;
        cfg.patch = patch;
        cfg.steps = steps;
        cfg.step_size = step_size;
        return outcome_to_dict(vafa(model, volume_from_array(x),
                                    labels_from_array(y, model.num_classes), cfg));
      },
      py::arg("model"), py::arg("x"), py::arg("y"), py::arg("q_max") = 30.0, py::arg("patch") = 8,
      py::arg("steps") = 20, py::arg("step_size") = 0.0);

  m.def("dct3", [](py::array_t<double, py::array::c_style | py::array::forcecast> cube) {
    if (cube.ndim() != 3 || cube.shape(0) != cube.shape(1) || cube.shape(1) != cube.shape(2))
      throw py::value_error("dct3 expects a cubic array");
    const int p = static_cast<int>(cube.shape(0));
    std::vector<double> values(cube.data(), cube.data() + cube.size());
    const DctBlock block = dct3(values, p);
    py::array_t<double> out({p, p, p});
    std::copy(block.coeffs.begin(), block.coeffs.end(), out.mutable_data());
    return out;
  });

  m.def("idct3", [](py::array_t<double, py::array::c_style | py::array::forcecast> coeffs) {
    if (coeffs.ndim() != 3 || coeffs.shape(0) != coeffs.shape(1) ||
        coeffs.shape(1) != coeffs.shape(2))
      throw py::value_error("idct3 expects a cubic array");
    DctBlock block;
    block.p = static_cast<int>(coeffs.shape(0));
    block.coeffs.assign(coeffs.data(), coeffs.data() + coeffs.size());
    const std::vector<double> cube = idct3(block);
    py::array_t<double> out({block.p, block.p, block.p});
    std::copy(cube.begin(), cube.end(), out.mutable_data());
    return out;
  });

  m.def(
      "make_band_mask",
      [](std::tuple<int, int, int> shape, int lo, int hi) {
        const FrequencyMask mask = make_band_mask(
            {std::get<0>(shape), std::get<1>(shape), std::get<2>(shape)}, lo, hi);
        py::array_t<std::uint8_t> out({mask.shape[0], mask.shape[1], mask.shape[2]});
        std::copy(mask.pass.begin(), mask.pass.end(), out.mutable_data());
        return out;
      },
      py::arg("shape"), py::arg("lo"), py::arg("hi"));

  m.def("filter_perturbation", [](py::array_t<float> x, py::array_t<float> x_adv,
                                  py::array_t<std::uint8_t, py::array::c_style> mask) {
    FrequencyMask m;
    m.shape = {static_cast<int>(mask.shape(0)), static_cast<int>(mask.shape(1)),
               static_cast<int>(mask.shape(2))};
    m.pass.assign(mask.data(), mask.data() + mask.size());
    return volume_to_array(
        filter_perturbation(volume_from_array(x), volume_from_array(x_adv), m));
  });

  m.def(
      "dsc",
      [](py::array_t<std::int32_t> pred, py::array_t<std::int32_t> gt, int cls) {
        const LabelVolume g = labels_from_array(gt, 0);
        const LabelVolume p = labels_from_array(pred, g.num_classes);
        return dsc(p, g, cls);
      },
      py::arg("pred"), py::arg("gt"), py::arg("cls"));

  m.def(
      "hd95",
      [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> pred,
         py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> gt) {
        if (pred.ndim() != 3 || gt.ndim() != 3) throw py::value_error("masks must be 3-D");
        Shape3 shape{static_cast<int>(pred.shape(0)), static_cast<int>(pred.shape(1)),
                     static_cast<int>(pred.shape(2))};
        std::vector<std::uint8_t> a(pred.data(), pred.data() + pred.size());
        std::vector<std::uint8_t> b(gt.data(), gt.data() + gt.size());
        bool flagged = false;
        const double value = hd95(a, b, shape, &flagged);
        return py::make_tuple(value, flagged);
      },
      py::arg("pred"), py::arg("gt"));

  m.def(
      "sliding_window_infer",
      [](const SegModel& model, py::array_t<float> x, double overlap) {
        return logits_to_array(
            sliding_window_infer(model, volume_from_array(x), model.window, overlap));
      },
      py::arg("model"), py::arg("x"), py::arg("overlap") = 0.5);

  m.def("read_nifti_volume", [](const std::string& path, const std::string& normalization) {
    const NormalizationRule rule =
        normalization == "minmax" ? NormalizationRule::MinMax : NormalizationRule::None;
    return volume_to_array(read_nifti_volume(path, rule));
  }, py::arg("path"), py::arg("normalization") = "minmax");
  m.def("read_nifti_labels",
        [](const std::string& path) { return labels_to_array(read_nifti_labels(path)); });
  m.def("write_nifti_volume", [](py::array_t<float> x, const std::string& path) {
    write_nifti(volume_from_array(x), path);
  });
  m.def("write_nifti_labels",
        [](py::array_t<std::int32_t> y, const std::string& path) {
          write_nifti(labels_from_array(y, 0), path);
        });

  m.def(
      "whitebox_eval",
      [](const py::object& config, const std::string& out_dir) {
        ExperimentConfig cfg = parse_experiment_config(py_to_json(config));
        const RobustnessReport report = whitebox_eval(cfg);
        if (!out_dir.empty()) emit_report(report, out_dir);
        return json_to_py(report.to_json());
      },
      py::arg("config"), py::arg("out_dir") = "");

  m.def(
      "transfer_eval",
      [](const py::object& config, const std::string& out_dir) {
        ExperimentConfig cfg = parse_experiment_config(py_to_json(config));
        const RobustnessReport report = transfer_eval(cfg);
        if (!out_dir.empty()) emit_report(report, out_dir);
        return json_to_py(report.to_json());
      },
      py::arg("config"), py::arg("out_dir") = "");

  m.def(
      "frequency_analysis",
      [](const py::object& config, const std::string& out_dir) {
        ExperimentConfig cfg = parse_experiment_config(py_to_json(config));
        const RobustnessReport report = frequency_analysis(cfg);
        if (!out_dir.empty()) emit_report(report, out_dir);
        return json_to_py(report.to_json());
      },
      py::arg("config"), py::arg("out_dir") = "");

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("volrob");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
  });

  py::register_exception<Error>(m, "VolrobError");
}
