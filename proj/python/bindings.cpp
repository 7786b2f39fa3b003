// Python bindings for the core operations: spike arithmetic, event binning,
// patchwork layouts, box overlap, response fusion, and the energy model.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "spikefet/energy.hpp"
#include "spikefet/events.hpp"
#include "spikefet/harness.hpp"
#include "spikefet/head.hpp"
#include "spikefet/patchwork.hpp"
#include "spikefet/spike.hpp"
#include "spikefet/tensor.hpp"

namespace py = pybind11;
using namespace spikefet;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<int> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<int>(a.shape(i));
    Tensor t(shape);
    std::copy(a.data(), a.data() + t.numel(), t.data());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

PatchArrangement arrangement_from_name(const std::string& name) {
    if (name == "search_right") return PatchArrangement::search_right;
    if (name == "search_left") return PatchArrangement::search_left;
    if (name == "search_bottom") return PatchArrangement::search_bottom;
    if (name == "search_top") return PatchArrangement::search_top;
    throw std::invalid_argument("unknown arrangement '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_spikefet, m) {
    m.doc() = "Spiking frame-event tracking core operations";

    // ---- spike arithmetic ----
    m.def("sn_count", &sn_count, py::arg("x"), py::arg("d_max") = 4,
          "Integer spike count clamp(round(x), 0, d_max)");
    m.def(
        "sn_forward",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, int d_max) {
            SpikeNeuronConfig cfg;
            cfg.d_max = d_max;
            return array_from_tensor(sn_forward(tensor_from_array(x), cfg));
        },
        py::arg("x"), py::arg("d_max") = 4, "Elementwise spike counts of an array");
    m.def(
        "unroll_to_binary",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& counts,
           int d_max) {
            SpikeNeuronConfig cfg;
            cfg.d_max = d_max;
            std::vector<py::array_t<double>> out;
            for (const Tensor& t : unroll_to_binary(tensor_from_array(counts), cfg))
                out.push_back(array_from_tensor(t));
            return out;
        },
        py::arg("counts"), py::arg("d_max") = 4,
        "Binary micro-steps of a count array (k ones then d_max - k zeros)");
    m.def(
        "firing_rate",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& counts) {
            return firing_rate(tensor_from_array(counts));
        },
        py::arg("counts"), "Mean spikes per neuron");

    // ---- event representation ----
    m.def(
        "events_to_frames",
        [](const py::array_t<int64_t, py::array::c_style | py::array::forcecast>& ev, int height,
           int width, int64_t t0, int64_t t1, int bins, bool normalize) {
            if (ev.ndim() != 2 || ev.shape(1) != 4)
                throw std::invalid_argument("events must be an [N, 4] array of (t, x, y, p)");
            EventStream s;
            s.height = height;
            s.width = width;
            for (py::ssize_t i = 0; i < ev.shape(0); ++i) {
                Event e;
                e.t_us = ev.at(i, 0);
                e.x = static_cast<int>(ev.at(i, 1));
                e.y = static_cast<int>(ev.at(i, 2));
                e.polarity = static_cast<int>(ev.at(i, 3));
                s.events.push_back(e);
            }
            Tensor t = events_to_frames(s, t0, t1, bins);
            if (normalize) normalize_event_frames(t);
            return array_from_tensor(t);
        },
        py::arg("events"), py::arg("height"), py::arg("width"), py::arg("t0"), py::arg("t1"),
        py::arg("bins"), py::arg("normalize") = true,
        "Bin (t, x, y, polarity) rows into [1, 2*bins, H, W] temporal frames");

    // ---- patchwork layouts ----
    py::class_<Rect>(m, "Rect")
        .def_readonly("name", &Rect::name)
        .def_readonly("x", &Rect::x)
        .def_readonly("y", &Rect::y)
        .def_readonly("w", &Rect::w)
        .def_readonly("h", &Rect::h);
    py::class_<PatchLayout>(m, "PatchLayout")
        .def_readonly("canvas_h", &PatchLayout::canvas_h)
        .def_readonly("canvas_w", &PatchLayout::canvas_w)
        .def_readonly("z1", &PatchLayout::z1)
        .def_readonly("z2", &PatchLayout::z2)
        .def_readonly("x", &PatchLayout::x)
        .def_property_readonly("arrangement", [](const PatchLayout& l) {
            return std::string(arrangement_name(l.arrangement));
        });
    m.def(
        "plan_patchwork",
        [](const std::string& arrangement, int hz, int wz, int hx, int wx) {
            return plan_patchwork(arrangement_from_name(arrangement), hz, wz, hx, wx);
        },
        py::arg("arrangement"), py::arg("hz"), py::arg("wz"), py::arg("hx"), py::arg("wx"),
        "Tile two templates and a search patch into one rectangle");
    m.def("type_map", &type_map, py::arg("layout"), py::arg("stride"),
          "Region id (0=z1, 1=z2, 2=search) per feature cell");

    // ---- boxes and responses ----
    m.def(
        "iou",
        [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
            return iou_boxes(Box{a[0], a[1], a[2], a[3]}, Box{b[0], b[1], b[2], b[3]});
        },
        py::arg("a"), py::arg("b"), "IoU of two (x, y, w, h) boxes");
    m.def(
        "fuse_responses",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& rf,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& re,
           double lam) {
            return array_from_tensor(
                fuse_responses(tensor_from_array(rf), tensor_from_array(re), lam));
        },
        py::arg("rf"), py::arg("re"), py::arg("lam"),
        "lam * rf + (1 - lam) * re, the dual-head response fusion");
    m.def(
        "hann_window", [](int h, int w) { return array_from_tensor(hann_window(h, w)); },
        py::arg("h"), py::arg("w"), "Outer product of 1-D Hann windows");

    // ---- energy model ----
    m.def(
        "estimate_energy",
        [](const std::vector<std::tuple<std::string, double, bool, double, int>>& items,
           double e_mac_pj, double e_ac_pj) {
            std::vector<LayerOpCount> counts;
            for (const auto& [name, flops, analog, rate, d_max] : items)
                counts.push_back({name, flops, analog, rate, d_max});
            EnergyCosts costs{e_mac_pj, e_ac_pj};
            EnergyReport r = estimate(counts, costs);
            py::dict out;
            out["mac_ops"] = r.mac_ops;
            out["ac_ops"] = r.ac_ops;
            out["mac_energy_pj"] = r.mac_energy_pj;
            out["ac_energy_pj"] = r.ac_energy_pj;
            out["total_pj"] = r.total_pj;
            out["total_mj"] = r.total_mj;
            return out;
        },
        py::arg("items"), py::arg("e_mac_pj") = 4.6, py::arg("e_ac_pj") = 0.9,
        "Theoretical energy of (name, flops, analog_input, firing_rate, d_max) layers");
}
