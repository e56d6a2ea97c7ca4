#pragma once

#include "qcmol/bayesopt.hpp"
#include "qcmol/chemmap.hpp"
#include "qcmol/circuit.hpp"
#include "qcmol/csv.hpp"
#include "qcmol/datasets.hpp"
#include "qcmol/error.hpp"
#include "qcmol/fingerprint.hpp"
#include "qcmol/molecule.hpp"
#include "qcmol/pipeline.hpp"
#include "qcmol/rng.hpp"
#include "qcmol/simulator.hpp"
#include "qcmol/stats.hpp"
#include "qcmol/svm.hpp"
