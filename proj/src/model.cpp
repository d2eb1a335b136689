#include "phaseflow/model.hpp"

namespace phaseflow::model {

std::size_t find_switch_time(const std::vector<int>& labels,
                             const SwitchConfig& sw) {
  int run = 0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    run = labels[t] == sw.trigger_phase ? run + 1 : 0;
    if (run >= sw.consecutive_s) return t;
  }
  return labels.size();
}

PhaseTimeline merged_infer(SpeechModel& speech, ImageModel& image,
                           const features::OperationRecord& op,
                           const SwitchConfig& sw, int segment_s) {
  sw.validate();
  const std::size_t t_total = op.seconds();
  const auto speech_labels = predict_labels(speech, op, segment_s);
  const std::size_t switch_t = find_switch_time(speech_labels, sw);

  PhaseTimeline out;
  out.label_names = op.timeline.label_names;
  out.labels = speech_labels;
  if (switch_t < t_total) {
    const auto image_labels = predict_labels(image, op, segment_s);
    for (std::size_t t = switch_t + 1; t < t_total; ++t)
      out.labels[t] = image_labels[t];
  }
  return out;
}

}  // namespace phaseflow::model
