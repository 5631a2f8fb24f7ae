export * from "./kdt.js";
export * from "./cutout.js";
export * from "./cnn.js";
export * from "./svm.js";
export * from "./report.js";
export * from "./prng.js";
