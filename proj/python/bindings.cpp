#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "codecsep/codec.hpp"
#include "codecsep/macprof.hpp"
#include "codecsep/metrics.hpp"
#include "codecsep/separator.hpp"
#include "codecsep/synth.hpp"
#include "codecsep/trainer.hpp"
#include "codecsep/wav_io.hpp"

namespace py = pybind11;
namespace cs = codecsep;

namespace {

cs::Waveform to_waveform(const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                         int sample_rate) {
  if (a.ndim() != 1) throw std::invalid_argument("waveform must be 1-D");
  cs::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(a.data(), a.data() + a.size());
  return w;
}

py::array_t<float> from_waveform(const cs::Waveform& w) {
  py::array_t<float> out(static_cast<py::ssize_t>(w.samples.size()));
  std::copy(w.samples.begin(), w.samples.end(), out.mutable_data());
  return out;
}

py::array_t<float> from_embedding(const cs::Embedding& e) {
  py::array_t<float> out({static_cast<py::ssize_t>(e.frames()),
                          static_cast<py::ssize_t>(e.channels())});
  std::copy(e.values.data.begin(), e.values.data.end(), out.mutable_data());
  return out;
}

cs::Embedding to_embedding(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("embedding must be 2-D [frames, channels]");
  cs::Embedding e;
  e.values.shape = {a.shape(0), a.shape(1)};
  e.values.data.assign(a.data(), a.data() + a.size());
  return e;
}

py::dict metric_dict(const cs::metrics::MetricValue& v) {
  py::dict d;
  d["value_db"] = v.value_db;
  d["finite"] = v.finite;
  return d;
}

py::dict report_dict(const cs::macprof::MacReport& r) {
  py::dict d;
  d["model"] = r.model;
  d["total_macs"] = r.total();
  py::list layers;
  for (const auto& l : r.layers) {
    py::dict ld;
    ld["name"] = l.name;
    ld["kind"] = l.kind;
    ld["in_shape"] = l.in_shape;
    ld["out_shape"] = l.out_shape;
    ld["macs"] = l.macs;
    layers.append(ld);
  }
  d["layers"] = layers;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "codec-space speech separation toolkit (C++ core)";

  // ---- signal ------------------------------------------------------------

  py::class_<cs::SynthSpec>(m, "SynthSpec")
      .def(py::init([](int num_examples, int num_speakers, double duration_s, int sample_rate,
                       double snr_low_db, double snr_high_db, uint64_t seed) {
             cs::SynthSpec s;
             s.num_examples = num_examples;
             s.num_speakers = num_speakers;
             s.duration_s = duration_s;
             s.sample_rate = sample_rate;
             s.snr_low_db = snr_low_db;
             s.snr_high_db = snr_high_db;
             s.seed = seed;
             s.validate();
             return s;
           }),
           py::arg("num_examples"), py::arg("num_speakers") = 2, py::arg("duration_s") = 1.0,
           py::arg("sample_rate") = 8000, py::arg("snr_low_db") = 0.0,
           py::arg("snr_high_db") = 5.0, py::arg("seed") = 0)
      .def_readonly("num_examples", &cs::SynthSpec::num_examples)
      .def_readonly("sample_rate", &cs::SynthSpec::sample_rate)
      .def_readonly("seed", &cs::SynthSpec::seed);

  m.def("synth_source",
        [](const cs::SynthSpec& spec, int example, int speaker) {
          return from_waveform(cs::synth_source(spec, example, speaker));
        },
        py::arg("spec"), py::arg("example_index"), py::arg("speaker_index"));
  m.def("synth_example",
        [](const cs::SynthSpec& spec, int example) {
          cs::SynthesizedExample ex = cs::synth_example(spec, example);
          py::list sources;
          for (const auto& s : ex.example.sources) sources.append(from_waveform(s));
          py::dict d;
          d["id"] = ex.example.id;
          d["mixture"] = from_waveform(ex.example.mixture);
          d["sources"] = sources;
          d["snr_db"] = ex.snr_db;
          return d;
        },
        py::arg("spec"), py::arg("example_index"));
  m.def("synth_dataset",
        [](const cs::SynthSpec& spec, const std::string& out_dir) {
          return cs::synth_dataset(spec, out_dir);
        },
        py::arg("spec"), py::arg("out_dir"));
  m.def("mix",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> s1,
           py::array_t<float, py::array::c_style | py::array::forcecast> s2, double snr_db,
           int sample_rate) {
          std::vector<cs::Waveform> src{to_waveform(s1, sample_rate),
                                        to_waveform(s2, sample_rate)};
          cs::Waveform mixture = cs::mix(src, snr_db);
          return py::make_tuple(from_waveform(mixture), from_waveform(src[0]),
                                from_waveform(src[1]));
        },
        py::arg("s1"), py::arg("s2"), py::arg("snr_db"), py::arg("sample_rate") = 8000,
        "Returns (mixture, s1, s2_scaled)");
  m.def("write_wav",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> samples,
           int sample_rate, const std::string& path) {
          cs::write_wav(to_waveform(samples, sample_rate), path);
        },
        py::arg("samples"), py::arg("sample_rate"), py::arg("path"));
  m.def("read_wav", [](const std::string& path) {
    cs::Waveform w = cs::read_wav(path);
    return py::make_tuple(from_waveform(w), w.sample_rate);
  });

  // ---- metrics -----------------------------------------------------------

  m.def("si_sdr",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> est,
           py::array_t<float, py::array::c_style | py::array::forcecast> ref, int sr) {
          return metric_dict(cs::metrics::si_sdr(to_waveform(est, sr), to_waveform(ref, sr)));
        },
        py::arg("estimate"), py::arg("reference"), py::arg("sample_rate") = 8000);
  m.def("sdr",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> est,
           py::array_t<float, py::array::c_style | py::array::forcecast> ref, int sr) {
          return metric_dict(cs::metrics::sdr(to_waveform(est, sr), to_waveform(ref, sr)));
        },
        py::arg("estimate"), py::arg("reference"), py::arg("sample_rate") = 8000);

  // ---- codec -------------------------------------------------------------

  py::class_<cs::Codec>(m, "Codec")
      .def(py::init([](const std::string& preset, uint64_t seed) {
             return cs::Codec(cs::CodecConfig::preset(preset), seed);
           }),
           py::arg("preset") = "toy", py::arg("seed") = 0)
      .def_static("load",
                  [](const std::string& path) {
                    return cs::Codec::from_archive(cs::load_archive(path));
                  })
      .def("save", [](const cs::Codec& c, const std::string& path) {
        cs::save_archive(c.to_archive(), path);
      })
      .def_property_readonly("hop", [](const cs::Codec& c) { return c.config().hop(); })
      .def_property_readonly("embedding_dim",
                             [](const cs::Codec& c) { return c.config().embedding_dim; })
      .def_property_readonly("sample_rate",
                             [](const cs::Codec& c) { return c.config().sample_rate; })
      .def_property_readonly("quantizer_ready", &cs::Codec::quantizer_ready)
      .def_property_readonly("param_count", &cs::Codec::param_count)
      .def("encode",
           [](const cs::Codec& c,
              py::array_t<float, py::array::c_style | py::array::forcecast> wave) {
             return from_embedding(c.encode(to_waveform(wave, c.config().sample_rate)));
           })
      .def("quantize",
           [](const cs::Codec& c,
              py::array_t<float, py::array::c_style | py::array::forcecast> emb) {
             cs::QuantizeResult q = c.quantize(to_embedding(emb));
             py::array_t<int32_t> codes({static_cast<py::ssize_t>(q.codes.frames),
                                         static_cast<py::ssize_t>(q.codes.num_codebooks)});
             std::copy(q.codes.indices.begin(), q.codes.indices.end(), codes.mutable_data());
             return py::make_tuple(codes, from_embedding(q.quantized), q.commitment_loss);
           },
           "Returns (codes, quantized_embedding, commitment_loss)")
      .def("decode",
           [](const cs::Codec& c,
              py::array_t<float, py::array::c_style | py::array::forcecast> emb) {
             return from_waveform(c.decode(to_embedding(emb)));
           })
      .def("transmit",
           [](const cs::Codec& c,
              py::array_t<float, py::array::c_style | py::array::forcecast> wave,
              bool use_rvq) {
             return from_waveform(c.transmit(to_waveform(wave, c.config().sample_rate),
                                             use_rvq));
           },
           py::arg("wave"), py::arg("use_rvq") = true);

  m.def("codec_si_sdr",
        [](py::array_t<float, py::array::c_style | py::array::forcecast> est,
           py::array_t<float, py::array::c_style | py::array::forcecast> clean_ref,
           const cs::Codec& codec, bool use_rvq) {
          cs::CodecTransmitter tx(codec, use_rvq);
          return metric_dict(cs::metrics::codec_si_sdr(
              to_waveform(est, codec.config().sample_rate),
              to_waveform(clean_ref, codec.config().sample_rate), tx));
        },
        py::arg("estimate"), py::arg("clean_reference"), py::arg("codec"),
        py::arg("use_rvq") = true);

  m.def("train_codec",
        [](cs::Codec& codec, const std::string& manifest_path, int epochs, double lr,
           uint64_t seed) {
          const auto manifest = cs::read_manifest(manifest_path);
          const cs::CodecTrainLog log = cs::train_codec(codec, manifest, epochs, lr, seed);
          py::dict d;
          d["epoch_losses"] = log.epoch_losses;
          d["step_losses"] = log.step_losses;
          return d;
        },
        py::arg("codec"), py::arg("manifest"), py::arg("epochs") = 12, py::arg("lr") = 1e-3,
        py::arg("seed") = 0);

  // ---- separator ---------------------------------------------------------

  py::class_<cs::Separator>(m, "Separator")
      .def(py::init([](const std::string& preset, int codec_embedding_dim, uint64_t seed) {
             return cs::Separator(cs::SeparatorConfig::preset(preset, codec_embedding_dim),
                                  seed);
           }),
           py::arg("preset") = "toy", py::arg("codec_embedding_dim") = 64, py::arg("seed") = 0)
      .def_static("load",
                  [](const std::string& path) {
                    return cs::Separator::from_archive(cs::load_archive(path));
                  })
      .def("save", [](const cs::Separator& s, const std::string& path) {
        cs::save_archive(s.to_archive(), path);
      })
      .def_property_readonly("param_count", &cs::Separator::param_count)
      .def_property_readonly("num_speakers",
                             [](const cs::Separator& s) { return s.config().num_speakers; })
      .def("separate",
           [](const cs::Separator& s,
              py::array_t<float, py::array::c_style | py::array::forcecast> emb) {
             py::list out;
             for (const cs::Embedding& e : s.separate(to_embedding(emb)))
               out.append(from_embedding(e));
             return out;
           })
      .def("separate_waveforms",
           [](const cs::Separator& s, const cs::Codec& codec,
              py::array_t<float, py::array::c_style | py::array::forcecast> mixture,
              bool use_rvq_in) {
             py::list out;
             for (const cs::Waveform& w : s.separate_waveforms(
                      codec, to_waveform(mixture, codec.config().sample_rate), use_rvq_in))
               out.append(from_waveform(w));
             return out;
           },
           py::arg("codec"), py::arg("mixture"), py::arg("use_rvq_in") = false);

  m.def("train_separator",
        [](cs::Separator& sep, const cs::Codec& codec, const std::string& train_manifest,
           const std::string& valid_manifest, const std::string& target, bool rvq_in_loop,
           double lr, int epochs, uint64_t seed) {
          cs::TrainConfig cfg;
          cfg.target = cs::train_target_from_string(target);
          cfg.rvq_in_loop = rvq_in_loop;
          cfg.lr = lr;
          cfg.epochs = epochs;
          cfg.seed = seed;
          const cs::TrainResult r =
              cs::train_separator(sep, codec, cs::read_manifest(train_manifest),
                                  cs::read_manifest(valid_manifest), cfg);
          py::list log;
          for (const cs::EpochLog& e : r.log) {
            py::dict d;
            d["epoch"] = e.epoch;
            d["train_loss"] = e.train_loss;
            d["val_primary"] = e.val_primary;
            d["val_secondary"] = e.val_secondary;
            d["lr"] = e.lr;
            log.append(d);
          }
          py::dict out;
          out["log"] = log;
          out["best_epoch"] = r.best_epoch;
          out["best_val"] = r.best_val;
          return out;
        },
        py::arg("separator"), py::arg("codec"), py::arg("train_manifest"),
        py::arg("valid_manifest"), py::arg("target") = "transmission",
        py::arg("rvq_in_loop") = false, py::arg("lr") = 1.5e-4, py::arg("epochs") = 40,
        py::arg("seed") = 0);

  // ---- macprof -----------------------------------------------------------

  m.def("macs_linear", &cs::macprof::macs_linear);
  m.def("macs_conv1d", &cs::macprof::macs_conv1d);
  m.def("macs_conv1d_transposed", &cs::macprof::macs_conv1d_transposed);
  m.def("macs_attention", &cs::macprof::macs_attention, py::arg("seq_len"),
        py::arg("model_dim"), py::arg("num_heads") = 4);
  m.def("profile",
        [](const std::string& model, const std::string& preset, double duration_s,
           int sample_rate) {
          const cs::CodecConfig cc = cs::CodecConfig::preset(preset);
          const cs::SeparatorConfig sc = cs::SeparatorConfig::preset(preset, cc.embedding_dim);
          return report_dict(cs::macprof::profile(cs::macprof::profile_model_from_string(model),
                                                  cc, sc, duration_s, sample_rate));
        },
        py::arg("model") = "pipeline", py::arg("preset") = "toy", py::arg("duration_s") = 2.0,
        py::arg("sample_rate") = 8000);
  m.def("profile_separator_at",
        [](const std::string& preset, int codec_embedding_dim, int64_t seq_len) {
          return report_dict(cs::macprof::profile_separator(
              cs::SeparatorConfig::preset(preset, codec_embedding_dim), seq_len));
        },
        py::arg("preset"), py::arg("codec_embedding_dim"), py::arg("seq_len"));

  // ---- checkpoints -------------------------------------------------------

  m.def("checkpoint_info", [](const std::string& path) {
    const cs::TensorArchive a = cs::load_archive(path);
    py::dict meta;
    for (const auto& [k, v] : a.metadata) meta[py::str(k)] = v;
    py::list tensors;
    for (const auto& [name, t] : a.tensors) {
      py::dict td;
      td["name"] = name;
      td["shape"] = t.shape;
      tensors.append(td);
    }
    py::dict d;
    d["metadata"] = meta;
    d["tensors"] = tensors;
    return d;
  });
}
