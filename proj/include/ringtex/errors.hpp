#pragma once

#include <stdexcept>
#include <string>

namespace ringtex {

// Root of everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration or parameters (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// Data ingestion failures (CLI exit code 3).
struct IngestionError : Error {
    using Error::Error;
};
struct MissingFileError : IngestionError {
    using IngestionError::IngestionError;
};
struct CsvFormatError : IngestionError {
    using IngestionError::IngestionError;
};
struct NonMonotonicTimestampsError : IngestionError {
    using IngestionError::IngestionError;
};
struct NonUniformStepError : IngestionError {
    using IngestionError::IngestionError;
};
struct UnitMismatchError : IngestionError {
    using IngestionError::IngestionError;
};
struct BitDepthError : IngestionError {
    using IngestionError::IngestionError;
};
struct ImageFormatError : IngestionError {
    using IngestionError::IngestionError;
};
struct ManifestError : IngestionError {
    using IngestionError::IngestionError;
};

// Rendering failures (CLI exit code 4).
struct RenderError : Error {
    using Error::Error;
};
struct NoOnsetError : RenderError {
    using RenderError::RenderError;
};
struct NoInteriorPeakError : RenderError {
    using RenderError::RenderError;
};
struct NoLiftOffError : RenderError {
    using RenderError::RenderError;
};
struct DegenerateIntervalError : RenderError {
    using RenderError::RenderError;
};
struct NyquistError : RenderError {
    using RenderError::RenderError;
};
struct RankDeficientError : RenderError {
    using RenderError::RenderError;
};
struct MisalignedSeriesError : RenderError {
    using RenderError::RenderError;
};

// Simulation failures. PreparationTimeoutError maps to CLI exit code 5.
struct SimulationError : Error {
    using Error::Error;
};
struct StepSizeError : SimulationError {
    using SimulationError::SimulationError;
};
struct PreparationTimeoutError : SimulationError {
    using SimulationError::SimulationError;
};

// Trial/ratings CSV schema violations (CLI exit code 6).
struct SchemaError : Error {
    using Error::Error;
};
// Degenerate statistics input (constant sample where spread is required).
struct ZeroVarianceError : SchemaError {
    using SchemaError::SchemaError;
};

}  // namespace ringtex
