// Payload shapes of the annotation HTTP API.

export interface TaskImage {
  image_id: string;
  url: string;
}

export interface SliderSpec {
  min: number;
  max: number;
  step: number;
}

export interface Task {
  task_id: string;
  kind: "filter" | "rate";
  prompt_text: string;
  sample_id: string | null;
  category: string;
  batch_id: string;
  images: TaskImage[];
  is_attention_check: boolean;
  slider?: SliderSpec;
  direction_label?: string | null;
}

export type FilterDecision = "accept" | "reject";

export interface ProgressReport {
  filter: Record<string, { unreviewed: number; accepted: number; rejected: number }>;
  ratings: { total_tasks: number; completed: Record<string, number> };
}
