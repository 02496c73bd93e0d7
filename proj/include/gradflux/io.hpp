#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gradflux/energy.hpp"
#include "gradflux/lattice.hpp"
#include "gradflux/logconcave.hpp"
#include "gradflux/potential.hpp"
#include "gradflux/sampler.hpp"

namespace gradflux {

// "# potential v1" then "x U(x)" rows; ParseError on malformed input.
Potential read_potential(std::istream& in);
void write_potential(std::ostream& out, const Potential& U);

// "# lattice v1" with sections: kind, vertices, edges (tail head per line),
// boundary (vertex value per line) and an optional coordinate table.
LatticeGraph read_lattice(std::istream& in);
void write_lattice(std::ostream& out, const LatticeGraph& G);

// "# density v1", "s_min h count", then one value per line.
DensityGrid1D read_density(std::istream& in);
void write_density(std::ostream& out, const DensityGrid1D& alpha);

// "# chain v1", graph hash, sweep counter, RNG state, then phi as
// little-endian 64-bit floats in vertex order.
void write_checkpoint(std::ostream& out, const SurfaceState& state);
// Restores into a state built on the same graph; ParseError on a graph hash
// mismatch.
void read_checkpoint(std::istream& in, SurfaceState& state);

// chain,sweep,vertex,value
void write_samples_csv(std::ostream& out, const SampleStream& s);
// t,value,exponent_fit,residual
void write_tail_curve_csv(std::ostream& out, const TailCurve& curve);

Potential load_potential_file(const std::string& path);
LatticeGraph load_lattice_file(const std::string& path);

}  // namespace gradflux
