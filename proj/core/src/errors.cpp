#include "focus/errors.hpp"

namespace focus {

ZeroNormRow::ZeroNormRow(std::size_t index)
    : Error("zero-norm row at index " + std::to_string(index)), index_(index) {}

InsufficientShots::InsufficientShots(int class_id, std::size_t available,
                                     std::size_t requested)
    : Error("class " + std::to_string(class_id) + " has " +
            std::to_string(available) + " train bags, " +
            std::to_string(requested) + " shots requested"),
      class_id_(class_id),
      available_(available) {}

MissingGradient::MissingGradient(const std::string& name)
    : Error("trainable parameter '" + name + "' has no gradient"), name_(name) {}

LabelOutOfRange::LabelOutOfRange(int label, int num_classes)
    : Error("label " + std::to_string(label) + " outside [0, " +
            std::to_string(num_classes) + ")") {}

MissingClass::MissingClass(int class_id)
    : Error("class " + std::to_string(class_id) + " absent from labels"),
      class_id_(class_id) {}

DegenerateAUC::DegenerateAUC(int class_id)
    : Error("one-vs-rest AUC undefined for class " + std::to_string(class_id) +
            ": needs at least one positive and one negative"),
      class_id_(class_id) {}

TruncatedFile::TruncatedFile(const std::string& path, std::uint64_t offset)
    : Error(path + ": truncated at byte offset " + std::to_string(offset)),
      offset_(offset) {}

}  // namespace focus
