"""
URL configuration for toxhub project.

Only the admin is exposed, for browsing recorded experiments and their
reduction tables.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
