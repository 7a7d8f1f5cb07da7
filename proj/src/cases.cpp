#include <cstdio>
#include <fstream>

#include "bof/data.hpp"
#include "bof/error.hpp"

namespace bof::data {

// Case inputs carry the fixed solver settings and phase properties as opaque
// text; nothing in this module evaluates them.
namespace {

std::string numg(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("emit_case: cannot open " + path.string());
  os << body;
  if (!os) throw DataError("emit_case: write failed for " + path.string());
}

std::string foam_header(const std::string& object) {
  return "FoamFile\n{\n    version     2.0;\n    format      ascii;\n    class       "
         "dictionary;\n    object      " +
         object + ";\n}\n\n";
}

constexpr const char* kControlDictBody =
    "application     blastFoam;\n"
    "startFrom       startTime;\n"
    "startTime       0;\n"
    "stopAt          endTime;\n"
    "endTime         7.5e-06;\n"
    "deltaT          1e-07;\n"
    "writeControl    timeStep;\n"
    "writeInterval   1;\n"
    "adjustTimeStep  no;\n"
    "functions\n{\n    #include \"probes\"\n}\n";

constexpr const char* kFvSolutionBody =
    "solvers\n"
    "{\n"
    "    \"(rho|rhoU|rhoE|alpha).*\"\n"
    "    {\n"
    "        solver          diagonal;\n"
    "        tolerance       1e-06;\n"
    "        relTol          0;\n"
    "    }\n"
    "}\n"
    "schemes\n"
    "{\n"
    "    gradScheme      leastSquares;\n"
    "    divScheme       Riemann;\n"
    "    reconstruction  vanAlbada;\n"
    "    timeIntegration Euler;\n"
    "    tolerance       1e-06;\n"
    "}\n";

constexpr const char* kPhasePropertiesBody =
    "phases (c4 air);\n"
    "\n"
    "c4\n"
    "{\n"
    "    type            detonating;\n"
    "    reactants\n"
    "    {\n"
    "        thermoType { equationOfState Murnaghan; }\n"
    "        equationOfState\n"
    "        {\n"
    "            gamma           0.25;\n"
    "            pRef            101298;\n"
    "            rho0            1601;\n"
    "            K0              0;\n"
    "        }\n"
    "        specie { molWeight 55.0; }\n"
    "        transport { mu 0; Pr 1; }\n"
    "        thermodynamics { Cv 1400; Hf 0.0; }\n"
    "    }\n"
    "    products\n"
    "    {\n"
    "        thermoType { equationOfState JWL; }\n"
    "        equationOfState\n"
    "        {\n"
    "            rho0            1601;\n"
    "            A               609.77e9;\n"
    "            B               12.95e9;\n"
    "            R1              4.5;\n"
    "            R2              1.4;\n"
    "            omega           0.25;\n"
    "        }\n"
    "        specie { molWeight 55.0; }\n"
    "        transport { mu 0; Pr 1; }\n"
    "        thermodynamics { Cv 1400; Hf 0.0; }\n"
    "    }\n"
    "    activationModel linear;\n"
    "    linearCoeffs\n"
    "    {\n"
    "        E0              9.0e9;\n"
    "        vDet            7850;\n"
    "    }\n"
    "    residualRho     1e-06;\n"
    "    residualAlpha   1e-10;\n"
    "}\n";

}  // namespace

void emit_case(const Scenario& s, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "system", ec);
  std::filesystem::create_directories(dir / "constant", ec);
  if (ec) throw DataError("emit_case: cannot create " + dir.string());

  write_text(dir / "scenario.json", scene::scenario_to_json(s) + "\n");
  write_text(dir / "system" / "controlDict", foam_header("controlDict") + kControlDictBody);
  write_text(dir / "system" / "fvSolution", foam_header("fvSolution") + kFvSolutionBody);
  write_text(dir / "constant" / "phaseProperties",
             foam_header("phaseProperties") + kPhasePropertiesBody);

  const GridSpec g;  // probe layout is the paper grid regardless of model grid
  std::string probes = foam_header("probes");
  probes +=
      "probes\n{\n    type            probes;\n    functionObjectLibs (\"libsampling.so\");\n"
      "    writeControl    timeStep;\n    writeInterval   1;\n    fields          (p);\n"
      "    probeLocations\n    (\n";
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      probes += "        (" + numg(g.x_at(i)) + " " + numg(g.y_at(j)) + " " + numg(g.z_probe) +
                ")\n";
  probes += "    );\n}\n";
  write_text(dir / "system" / "probes", probes);

  std::string geom = foam_header("obstaclesDict");
  geom += "obstacles\n(\n";
  for (int k = 0; k < 3; ++k) {
    const scene::Obstacle& o = s.obstacles[k];
    geom += "    box" + std::to_string(k + 1) + "\n    {\n        min (" + numg(o.x_min) + " " +
            numg(o.y_min) + " " + numg(o.z_min) + ");\n        max (" + numg(o.x_max) + " " +
            numg(o.y_max) + " " + numg(o.z_max) + ");\n    }\n";
  }
  geom += ");\n\ncharge\n{\n    location (" + numg(s.charge.x) + " " + numg(s.charge.y) +
          " 0);\n    mass " + numg(s.charge.mass) + ";\n}\n";
  write_text(dir / "constant" / "obstaclesDict", geom);
}

}  // namespace bof::data
