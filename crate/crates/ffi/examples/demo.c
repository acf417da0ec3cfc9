/* Drives a scenario for one simulated second and prints the core pose. */
#include <stdio.h>
#include <stdlib.h>

#include "crumple.h"

static void report(const char *what, CrumpleStatus status) {
    char message[512];
    crumple_last_error_message(message, sizeof message);
    fprintf(stderr, "%s failed (%d): %s\n", what, (int)status, message);
}

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: %s scenario.cfg\n", argv[0]);
        return 1;
    }
    CrumpleVehicle *car = NULL;
    CrumpleStatus status = crumple_vehicle_from_scenario(argv[1], &car);
    if (status != CRUMPLE_STATUS_OK) {
        report("load", status);
        return 1;
    }
    CrumpleFrame frame;
    while (crumple_vehicle_clock(car) < 1.0) {
        status = crumple_vehicle_step(car, &frame);
        if (status != CRUMPLE_STATUS_OK) {
            report("step", status);
            crumple_vehicle_free(car);
            return 1;
        }
    }
    double pose[7];
    crumple_vehicle_pose(car, pose);
    printf("frame %llu  position %.3f %.3f %.3f  plastic events %llu\n", (unsigned long long)frame.frame, pose[0],
           pose[1], pose[2], (unsigned long long)frame.plastic_events);

    size_t n = crumple_vehicle_vertex_count(car);
    double *surface = malloc(3 * n * sizeof *surface);
    if (surface && crumple_vehicle_copy_surface(car, surface, 3 * n) == CRUMPLE_STATUS_OK) {
        printf("%zu surface vertices, first at %.3f %.3f %.3f\n", n, surface[0], surface[1], surface[2]);
    }
    free(surface);
    crumple_vehicle_free(car);
    return 0;
}
